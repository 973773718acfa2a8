use std::fmt;

use crate::error::{Error, Result};

/// Step size `h_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `h_k = h0`.
    Fixed(f64),
    /// `h_k = h0 / (k + 1)`.
    Decreasing(f64),
}

/// Minibatch size `B_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSchedule {
    /// `B_k = B0`.
    Fixed(usize),
    /// `B_k = B0 + floor((ln(k + 1))^(100/99))`, clamped to `N`.
    Growing(usize),
}

/// Exponent of the growing batch schedule.
pub const GROWTH_EXPONENT: f64 = 100.0 / 99.0;

impl StepSchedule {
    pub fn initial(&self) -> f64 {
        match *self {
            StepSchedule::Fixed(h0) | StepSchedule::Decreasing(h0) => h0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h0 = self.initial();
        if h0 > 0.0 && h0.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("step size h0 must be positive, got {h0}")))
        }
    }
}

impl BatchSchedule {
    pub fn initial(&self) -> usize {
        match *self {
            BatchSchedule::Fixed(b0) | BatchSchedule::Growing(b0) => b0,
        }
    }

    pub fn validate(&self, num_terms: usize) -> Result<()> {
        let b0 = self.initial();
        if b0 == 0 || b0 > num_terms {
            return Err(Error::Config(format!(
                "initial batch size must satisfy 1 <= B0 <= N, got B0 = {b0}, N = {num_terms}"
            )));
        }
        Ok(())
    }
}

pub fn step_size(k: usize, schedule: &StepSchedule) -> f64 {
    match *schedule {
        StepSchedule::Fixed(h0) => h0,
        StepSchedule::Decreasing(h0) => h0 / (k as f64 + 1.0),
    }
}

pub fn batch_size(k: usize, schedule: &BatchSchedule, num_terms: usize) -> usize {
    match *schedule {
        BatchSchedule::Fixed(b0) => b0.min(num_terms),
        BatchSchedule::Growing(b0) => {
            let growth = (k as f64 + 1.0).ln().powf(GROWTH_EXPONENT).floor() as usize;
            b0.saturating_add(growth).min(num_terms)
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Fixed(_) => f.write_str("fixed"),
            StepSchedule::Decreasing(_) => f.write_str("decreasing"),
        }
    }
}

impl fmt::Display for BatchSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSchedule::Fixed(_) => f.write_str("fixed"),
            BatchSchedule::Growing(_) => f.write_str("growing"),
        }
    }
}
