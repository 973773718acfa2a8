//! Unary RBF kernel `K(z) = exp(-|z|^2 / bandwidth_sq)` and its gradient.
//!
//! Interaction terms evaluate `K` on particle differences `θ_i - θ_j`, so the
//! kernel is even and its gradient is odd.

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};

/// Bandwidth used when every pairwise distance is zero.
pub const DEFAULT_BANDWIDTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthMode {
    /// `bandwidth_sq` is used as given for the whole run.
    Fixed,
    /// `bandwidth_sq` is re-estimated from the pre-step ensemble at every step.
    MedianHeuristic { floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    bandwidth_sq: f64,
    mode: BandwidthMode,
}

impl KernelSpec {
    pub fn fixed(bandwidth_sq: f64) -> Result<Self> {
        check_bandwidth(bandwidth_sq)?;
        Ok(Self {
            bandwidth_sq,
            mode: BandwidthMode::Fixed,
        })
    }

    /// Median-heuristic kernel with the default degenerate floor.
    ///
    /// Until [`KernelSpec::refreshed`] is called the bandwidth is 1.
    pub fn median_heuristic() -> Self {
        Self {
            bandwidth_sq: 1.0,
            mode: BandwidthMode::MedianHeuristic {
                floor: DEFAULT_BANDWIDTH_FLOOR,
            },
        }
    }

    pub fn median_heuristic_with_floor(floor: f64) -> Result<Self> {
        check_bandwidth(floor)?;
        Ok(Self {
            bandwidth_sq: 1.0,
            mode: BandwidthMode::MedianHeuristic { floor },
        })
    }

    pub fn bandwidth_sq(&self) -> f64 {
        self.bandwidth_sq
    }

    pub fn mode(&self) -> BandwidthMode {
        self.mode
    }

    /// The kernel to use for one step on `ensemble`: unchanged in fixed mode,
    /// re-estimated from the ensemble in median mode.
    pub fn refreshed(&self, ensemble: &ParticleEnsemble) -> Result<Self> {
        match self.mode {
            BandwidthMode::Fixed => Ok(*self),
            BandwidthMode::MedianHeuristic { floor } => {
                // A single particle has no pairwise distances; its only
                // interaction is with itself, where K = 1 regardless.
                let bandwidth_sq = if ensemble.num_particles() < 2 {
                    self.bandwidth_sq
                } else {
                    median_bandwidth_with_floor(ensemble, floor)?
                };
                Ok(Self {
                    bandwidth_sq,
                    mode: self.mode,
                })
            }
        }
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        self.validate(z)?;
        Ok(self.eval_unchecked(z))
    }

    pub fn grad(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.validate(z)?;
        let mut out = vec![0.0; z.len()];
        self.grad_into(z, &mut out);
        Ok(out)
    }

    fn validate(&self, z: &[f64]) -> Result<()> {
        check_bandwidth(self.bandwidth_sq)?;
        if let Some(v) = z.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("kernel argument has non-finite component {v}")));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, z: &[f64]) -> f64 {
        (-squared_norm(z) / self.bandwidth_sq).exp()
    }

    /// Writes `∇K(z) = -(2 / bandwidth_sq) K(z) z` into `out`.
    #[inline]
    pub(crate) fn grad_into(&self, z: &[f64], out: &mut [f64]) {
        let scale = -2.0 / self.bandwidth_sq * self.eval_unchecked(z);
        for (o, zi) in out.iter_mut().zip(z) {
            *o = scale * zi;
        }
    }
}

fn check_bandwidth(bandwidth_sq: f64) -> Result<()> {
    if bandwidth_sq > 0.0 && bandwidth_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "kernel bandwidth_sq must be positive and finite, got {bandwidth_sq}"
        )))
    }
}

#[inline]
pub(crate) fn squared_norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// `exp(-|z|^2 / bandwidth_sq)`.
pub fn kernel_eval(z: &[f64], spec: &KernelSpec) -> Result<f64> {
    spec.eval(z)
}

/// `-(2 / bandwidth_sq) exp(-|z|^2 / bandwidth_sq) z`.
pub fn kernel_grad(z: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    spec.grad(z)
}

/// Median-heuristic squared bandwidth `med^2 / max(ln M, 1)` with the default floor.
pub fn median_bandwidth(ensemble: &ParticleEnsemble) -> Result<f64> {
    median_bandwidth_with_floor(ensemble, DEFAULT_BANDWIDTH_FLOOR)
}

/// `med^2 / max(ln M, 1)` where `med` is the median of all `M(M-1)/2` pairwise
/// Euclidean distances; returns `floor` if that value is zero.
pub fn median_bandwidth_with_floor(ensemble: &ParticleEnsemble, floor: f64) -> Result<f64> {
    let m = ensemble.num_particles();
    if m < 2 {
        return Err(Error::Precondition(format!(
            "median bandwidth needs at least 2 particles, got {m}"
        )));
    }
    let mut distances = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        let a = ensemble.particle(i);
        for j in (i + 1)..m {
            let b = ensemble.particle(j);
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            distances.push(d2.sqrt());
        }
    }
    let med = median_in_place(&mut distances);
    let bandwidth_sq = med * med / (m as f64).ln().max(1.0);
    if bandwidth_sq > 0.0 {
        Ok(bandwidth_sq)
    } else {
        Ok(floor)
    }
}

/// Median of a non-empty slice (mean of the two central values for even length).
fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        upper_mid
    } else {
        let lower_mid = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_mid + upper_mid)
    }
}
