//! Target posteriors expressed as additive potentials `U = Σ_q U_q`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamPurpose};

/// An additive potential energy `U(θ) = Σ_q U_q(θ)` with per-term gradients `F_q`.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of additive terms `N`.
    fn num_terms(&self) -> usize;

    /// Writes `F_q(θ)` into `out`.
    fn term_gradient(&self, q: usize, theta: &[f64], out: &mut [f64]);

    /// `U_q(θ)`, when the potential exposes it.
    fn term_energy(&self, _q: usize, _theta: &[f64]) -> Option<f64> {
        None
    }

    /// Writes the full gradient `F(θ) = Σ_q F_q(θ)` into `out`.
    ///
    /// Implementations may override this with a closed form.
    fn gradient(&self, theta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut term = vec![0.0; out.len()];
        for q in 0..self.num_terms() {
            self.term_gradient(q, theta, &mut term);
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
        }
    }

    fn energy(&self, theta: &[f64]) -> Option<f64> {
        (0..self.num_terms())
            .map(|q| self.term_energy(q, theta))
            .sum()
    }
}

/// Analytic quantities of the target used by diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    None,
    /// One-dimensional Gaussian law.
    Gaussian { mean: f64, variance: f64 },
    /// Centers of the local modes of the density.
    Modes { centers: Vec<Vec<f64>> },
}

impl Reference {
    /// `E[θ^2]` under a Gaussian reference.
    pub fn second_moment(&self) -> Option<f64> {
        match self {
            Reference::Gaussian { mean, variance } => Some(variance + mean * mean),
            _ => None,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Reference::Gaussian { mean, .. } => Some(*mean),
            _ => None,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            Reference::Gaussian { variance, .. } => Some(*variance),
            _ => None,
        }
    }

    /// Quantile function of a Gaussian reference.
    pub fn quantile_fn(&self) -> Option<impl Fn(f64) -> f64> {
        match self {
            Reference::Gaussian { mean, variance } => {
                let normal = Normal::new(*mean, variance.sqrt()).ok()?;
                Some(move |u: f64| normal.inverse_cdf(u))
            }
            _ => None,
        }
    }

    pub fn mode_centers(&self) -> Option<&[Vec<f64>]> {
        match self {
            Reference::Modes { centers } => Some(centers),
            _ => None,
        }
    }
}

/// A potential together with its reference descriptor.
#[derive(Clone)]
pub struct TargetModel {
    name: String,
    potential: Arc<dyn Potential>,
    reference: Reference,
}

impl fmt::Debug for TargetModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetModel")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("num_terms", &self.num_terms())
            .field("reference", &self.reference)
            .finish()
    }
}

impl TargetModel {
    pub fn new(name: impl Into<String>, potential: impl Potential + 'static, reference: Reference) -> Self {
        Self {
            name: name.into(),
            potential: Arc::new(potential),
            reference,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn num_terms(&self) -> usize {
        self.potential.num_terms()
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.potential.gradient(theta, &mut out);
        out
    }

    pub fn term_gradient(&self, q: usize, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.potential.term_gradient(q, theta, &mut out);
        out
    }

    pub fn energy(&self, theta: &[f64]) -> Option<f64> {
        self.potential.energy(theta)
    }

    pub fn term_energy(&self, q: usize, theta: &[f64]) -> Option<f64> {
        self.potential.term_energy(q, theta)
    }

    /// Writes the minibatch estimate `(N / B) Σ_{q ∈ batch} F_q(θ)` into `out`.
    ///
    /// A batch covering every term falls back to the full gradient.
    pub fn stochastic_gradient_into(&self, theta: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()> {
        let n = self.num_terms();
        if batch.is_empty() {
            return Err(Error::Precondition("minibatch is empty".into()));
        }
        if let Some(&q) = batch.iter().find(|&&q| q >= n) {
            return Err(Error::Domain(format!("term index {q} out of range for N = {n}")));
        }
        if batch.len() == n {
            self.potential.gradient(theta, out);
            return Ok(());
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut term = vec![0.0; out.len()];
        for &q in batch {
            self.potential.term_gradient(q, theta, &mut term);
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
        }
        let scale = n as f64 / batch.len() as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }
}

/// `(N / B) Σ_{q ∈ batch} F_q(position)`.
pub fn stochastic_gradient(target: &TargetModel, position: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
    if position.len() != target.dim() {
        return Err(Error::Precondition(format!(
            "position has dimension {}, target has {}",
            position.len(),
            target.dim()
        )));
    }
    let mut out = vec![0.0; target.dim()];
    target.stochastic_gradient_into(position, batch, &mut out)?;
    Ok(out)
}

/// Uniform size-`b` subset of `0..n` without replacement, in ascending order.
pub fn sample_batch<R: Rng + ?Sized>(n: usize, b: usize, rng: &mut R) -> Result<Vec<usize>> {
    if b == 0 || b > n {
        return Err(Error::Precondition(format!(
            "batch size must satisfy 1 <= B <= N, got B = {b}, N = {n}"
        )));
    }
    if b == n {
        return Ok((0..n).collect());
    }
    let mut batch = index::sample(rng, n, b).into_vec();
    batch.sort_unstable();
    Ok(batch)
}

#[derive(Debug, Clone)]
struct Gaussian1d {
    mean: f64,
    variance: f64,
}

impl Potential for Gaussian1d {
    fn dim(&self) -> usize {
        1
    }

    fn num_terms(&self) -> usize {
        1
    }

    fn term_gradient(&self, _q: usize, theta: &[f64], out: &mut [f64]) {
        out[0] = (theta[0] - self.mean) / self.variance;
    }

    fn term_energy(&self, _q: usize, theta: &[f64]) -> Option<f64> {
        let r = theta[0] - self.mean;
        Some(r * r / (2.0 * self.variance))
    }
}

/// `U(θ) = (θ - mean)^2 / (2 variance)`.
pub fn gaussian1d_target(mean: f64, variance: f64) -> Result<TargetModel> {
    if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
        return Err(Error::Config(format!(
            "gaussian target needs finite mean and positive variance, got N({mean}, {variance})"
        )));
    }
    Ok(TargetModel::new(
        "gaussian1d",
        Gaussian1d { mean, variance },
        Reference::Gaussian { mean, variance },
    ))
}

/// Likelihood `x_q ~ N(θ, 1)` with prior `θ ~ N(0, 1)` split evenly across terms.
#[derive(Debug, Clone)]
struct ConjugatePosterior {
    data: Vec<f64>,
    data_sum: f64,
}

impl Potential for ConjugatePosterior {
    fn dim(&self) -> usize {
        1
    }

    fn num_terms(&self) -> usize {
        self.data.len()
    }

    fn term_gradient(&self, q: usize, theta: &[f64], out: &mut [f64]) {
        let n = self.data.len() as f64;
        out[0] = (theta[0] - self.data[q]) + theta[0] / n;
    }

    fn term_energy(&self, q: usize, theta: &[f64]) -> Option<f64> {
        let n = self.data.len() as f64;
        let r = theta[0] - self.data[q];
        Some(0.5 * r * r + theta[0] * theta[0] / (2.0 * n))
    }

    fn gradient(&self, theta: &[f64], out: &mut [f64]) {
        let n = self.data.len() as f64;
        out[0] = (n + 1.0) * theta[0] - self.data_sum;
    }
}

/// Posterior of `θ` given `x_q ~ N(θ, 1)`, `θ ~ N(0, 1)`; the exact posterior is
/// `N(Σx / (N + 1), 1 / (N + 1))`.
pub fn conjugate_posterior_target(data: &[f64]) -> Result<TargetModel> {
    if data.is_empty() {
        return Err(Error::Config("conjugate posterior needs at least one datum".into()));
    }
    if let Some(x) = data.iter().find(|x| !x.is_finite()) {
        return Err(Error::Config(format!("datum {x} is not finite")));
    }
    let data_sum: f64 = data.iter().sum();
    let n = data.len() as f64;
    let reference = Reference::Gaussian {
        mean: data_sum / (n + 1.0),
        variance: 1.0 / (n + 1.0),
    };
    Ok(TargetModel::new(
        "conjugate-posterior",
        ConjugatePosterior {
            data: data.to_vec(),
            data_sum,
        },
        reference,
    ))
}

/// `n` i.i.d. draws from `N(mean, 1)`, reproducible from `seed`.
pub fn gaussian_data(n: usize, mean: f64, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, StreamPurpose::Data, 0, 0);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            mean + z
        })
        .collect()
}

/// Coefficients of the sine expansion in the multi-mode energy.
pub const MULTIMODE_COEFFS: [f64; 10] = [-0.47, -0.83, -0.71, -0.02, 0.24, 0.01, 0.27, -0.37, 0.87, -0.37];

/// Mode search grid and acceptance threshold.
const MODE_GRID_POINTS: usize = 20_001;
const MODE_GRID_LO: f64 = -5.0;
const MODE_GRID_HI: f64 = 5.0;
const MODE_ENERGY_THRESHOLD: f64 = 10.0;

/// `U(θ) = exp(g(θ))` with `g(θ) = (3/4)θ^2 - (3/2) Σ_i c_i sin(π i (θ + 4) / 4)`.
#[derive(Debug, Clone, Copy)]
struct Multimode1d;

impl Multimode1d {
    fn exponent(theta: f64) -> f64 {
        let series: f64 = MULTIMODE_COEFFS
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let i = (k + 1) as f64;
                c * (0.25 * PI * i * (theta + 4.0)).sin()
            })
            .sum();
        0.75 * theta * theta - 1.5 * series
    }

    fn exponent_derivative(theta: f64) -> f64 {
        let series: f64 = MULTIMODE_COEFFS
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let i = (k + 1) as f64;
                c * 0.25 * PI * i * (0.25 * PI * i * (theta + 4.0)).cos()
            })
            .sum();
        1.5 * theta - 1.5 * series
    }

    fn energy_at(theta: f64) -> f64 {
        Self::exponent(theta).exp()
    }
}

impl Potential for Multimode1d {
    fn dim(&self) -> usize {
        1
    }

    fn num_terms(&self) -> usize {
        1
    }

    fn term_gradient(&self, _q: usize, theta: &[f64], out: &mut [f64]) {
        let t = theta[0];
        out[0] = Self::energy_at(t) * Self::exponent_derivative(t);
    }

    fn term_energy(&self, _q: usize, theta: &[f64]) -> Option<f64> {
        Some(Self::energy_at(theta[0]))
    }
}

/// Strict local minima of the multi-mode energy on the search grid with `U < 10`.
fn multimode_centers() -> Vec<Vec<f64>> {
    let step = (MODE_GRID_HI - MODE_GRID_LO) / (MODE_GRID_POINTS - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..MODE_GRID_POINTS)
        .map(|k| {
            let t = MODE_GRID_LO + step * k as f64;
            (t, Multimode1d::energy_at(t))
        })
        .collect();
    grid.windows(3)
        .filter(|w| w[1].1 < w[0].1 && w[1].1 < w[2].1 && w[1].1 < MODE_ENERGY_THRESHOLD)
        .map(|w| vec![w[1].0])
        .collect()
}

/// The one-dimensional multi-mode density `p(θ) ∝ exp(-U(θ))`.
pub fn multimode1d_target() -> TargetModel {
    TargetModel::new(
        "multimode1d",
        Multimode1d,
        Reference::Modes {
            centers: multimode_centers(),
        },
    )
}
