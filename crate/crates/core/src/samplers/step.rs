//! Single-iteration particle updates.
//!
//! All four rules read only the pre-step snapshot and return a new ensemble
//! with the iteration counter advanced by one. With `G_i` the stochastic
//! gradient of the potential at particle `i` and
//!
//! ```text
//! I_i = (1/M) Σ_j [ -K(θ_i - θ_j) G_j + ∇K(θ_j - θ_i) ]
//! ```
//!
//! the interaction drift (kernel-weighted descent plus repulsion), the rules are
//!
//! ```text
//! SGLD  θ_i - h β⁻¹ G_i                + sqrt(2h/β) ξ_i
//! SVGD  θ_i              + h I_i
//! POS   θ_i - h β⁻¹ G_i  + h I_i
//! SPOS  θ_i - h β⁻¹ G_i  + h I_i       + sqrt(2h/β) ξ_i
//! ```

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::rng::{substream, StreamPurpose};
use crate::targets::TargetModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sgld,
    Svgd,
    /// Deterministic particle-optimization sampling (SPOS without noise).
    Pos,
    Spos,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Sgld, Algorithm::Svgd, Algorithm::Pos, Algorithm::Spos];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Sgld => "sgld",
            Algorithm::Svgd => "svgd",
            Algorithm::Pos => "pos",
            Algorithm::Spos => "spos",
        }
    }

    /// Whether particles interact through the kernel.
    pub fn is_interacting(&self) -> bool {
        !matches!(self, Algorithm::Sgld)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgld" => Ok(Algorithm::Sgld),
            "svgd" => Ok(Algorithm::Svgd),
            "pos" | "pos-deterministic" => Ok(Algorithm::Pos),
            "spos" => Ok(Algorithm::Spos),
            other => Err(Error::parse("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Source of the Gaussian increments `ξ_i`.
#[derive(Debug, Clone, Copy)]
pub enum Noise<'a> {
    /// Draw from the counter-based substream `(seed, particle, iteration)`.
    Seeded(u64),
    /// Use the supplied `M × d` row-major values.
    Forced(&'a [f64]),
    /// All increments zero.
    Zero,
}

impl Noise<'_> {
    fn fill(&self, ensemble: &ParticleEnsemble, out: &mut [f64]) -> Result<()> {
        match *self {
            Noise::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Noise::Forced(values) => {
                if values.len() != out.len() {
                    return Err(Error::Precondition(format!(
                        "forced noise has {} values, ensemble needs {}",
                        values.len(),
                        out.len()
                    )));
                }
                out.copy_from_slice(values);
            }
            Noise::Seeded(seed) => {
                let d = ensemble.dim();
                let k = ensemble.iteration() as u64;
                for (i, row) in out.chunks_exact_mut(d).enumerate() {
                    let mut rng = substream(seed, StreamPurpose::Noise, i as u64, k);
                    for v in row {
                        *v = StandardNormal.sample(&mut rng);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Minibatch assignment for one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Batches {
    /// One index set used for every particle.
    Shared(Vec<usize>),
    /// One index set per particle.
    PerParticle(Vec<Vec<usize>>),
}

impl Batches {
    pub fn full(num_terms: usize) -> Self {
        Batches::Shared((0..num_terms).collect())
    }

    fn for_particle(&self, i: usize) -> &[usize] {
        match self {
            Batches::Shared(b) => b,
            Batches::PerParticle(bs) => &bs[i],
        }
    }
}

fn check_inputs(ensemble: &ParticleEnsemble, target: &TargetModel, h: f64) -> Result<()> {
    if ensemble.dim() != target.dim() {
        return Err(Error::Precondition(format!(
            "ensemble dimension {} does not match target dimension {}",
            ensemble.dim(),
            target.dim()
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("step size must be positive, got {h}")));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && !beta.is_nan() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature beta must be positive, got {beta}")))
    }
}

/// Stochastic gradients `G_i` for every particle, row-major.
pub fn particle_gradients(ensemble: &ParticleEnsemble, target: &TargetModel, batches: &Batches) -> Result<Vec<f64>> {
    let d = ensemble.dim();
    if let Batches::PerParticle(bs) = batches {
        if bs.len() != ensemble.num_particles() {
            return Err(Error::Precondition(format!(
                "{} per-particle batches for {} particles",
                bs.len(),
                ensemble.num_particles()
            )));
        }
    }
    let mut grads = vec![0.0; ensemble.as_flat().len()];
    for (i, (theta, g)) in ensemble.particles().zip(grads.chunks_exact_mut(d)).enumerate() {
        target.stochastic_gradient_into(theta, batches.for_particle(i), g)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: ensemble.iteration(),
                detail: format!("non-finite gradient at particle {i}"),
            });
        }
    }
    Ok(grads)
}

/// The interaction drift `I_i` for every particle, row-major.
///
/// Pairs are visited once: `K` is even and `∇K` odd, so the pair `(i, j)`
/// contributes `-K G_j + c K (θ_i - θ_j)` to `i` and `-K G_i - c K (θ_i - θ_j)`
/// to `j`, with `c = 2 / bandwidth_sq`.
pub fn interaction_drift(ensemble: &ParticleEnsemble, grads: &[f64], kernel: &KernelSpec) -> Vec<f64> {
    let m = ensemble.num_particles();
    let d = ensemble.dim();
    let x = ensemble.as_flat();
    let inv_bw = 1.0 / kernel.bandwidth_sq();
    let repulsion = 2.0 * inv_bw;
    // Self-interaction: K(0) = 1, ∇K(0) = 0.
    let mut drift: Vec<f64> = grads.iter().map(|g| -g).collect();
    let mut diff = vec![0.0; d];
    for i in 0..m {
        for j in (i + 1)..m {
            let mut r2 = 0.0;
            for c in 0..d {
                let v = x[i * d + c] - x[j * d + c];
                diff[c] = v;
                r2 += v * v;
            }
            let k = (-r2 * inv_bw).exp();
            let push = repulsion * k;
            for c in 0..d {
                drift[i * d + c] += -k * grads[j * d + c] + push * diff[c];
                drift[j * d + c] += -k * grads[i * d + c] - push * diff[c];
            }
        }
    }
    let inv_m = 1.0 / m as f64;
    drift.iter_mut().for_each(|v| *v *= inv_m);
    drift
}

/// Terms included in one update.
#[derive(Debug, Clone, Copy)]
struct UpdateTerms<'a> {
    /// `β⁻¹` multiplying the particle's own gradient, if present.
    langevin_drift: Option<f64>,
    kernel: Option<&'a KernelSpec>,
    /// `β⁻¹` scaling the Gaussian increment `sqrt(2 h β⁻¹) ξ`, if present.
    diffusion: Option<f64>,
}

fn apply(
    ensemble: &ParticleEnsemble,
    grads: &[f64],
    h: f64,
    terms: UpdateTerms<'_>,
    noise: Noise<'_>,
) -> Result<ParticleEnsemble> {
    let mut next = ensemble.as_flat().to_vec();
    if let Some(inv_beta) = terms.langevin_drift {
        for (x, g) in next.iter_mut().zip(grads) {
            *x -= h * inv_beta * g;
        }
    }
    if let Some(kernel) = terms.kernel {
        let kernel = kernel.refreshed(ensemble)?;
        for (x, v) in next.iter_mut().zip(interaction_drift(ensemble, grads, &kernel)) {
            *x += h * v;
        }
    }
    if let Some(inv_beta) = terms.diffusion {
        let mut xi = vec![0.0; next.len()];
        noise.fill(ensemble, &mut xi)?;
        let scale = (2.0 * h * inv_beta).sqrt();
        for (x, z) in next.iter_mut().zip(&xi) {
            *x += scale * z;
        }
    }
    ensemble.advance(next)
}

/// Independent Langevin steps; each particle may use its own minibatch.
pub fn sgld_step(
    ensemble: &ParticleEnsemble,
    target: &TargetModel,
    h: f64,
    beta: f64,
    batches: &Batches,
    noise: Noise<'_>,
) -> Result<ParticleEnsemble> {
    check_inputs(ensemble, target, h)?;
    check_beta(beta)?;
    let grads = particle_gradients(ensemble, target, batches)?;
    let inv_beta = 1.0 / beta;
    let terms = UpdateTerms {
        langevin_drift: Some(inv_beta),
        kernel: None,
        diffusion: Some(inv_beta),
    };
    apply(ensemble, &grads, h, terms, noise)
}

pub fn svgd_step(
    ensemble: &ParticleEnsemble,
    target: &TargetModel,
    h: f64,
    kernel: &KernelSpec,
    batch: &[usize],
) -> Result<ParticleEnsemble> {
    check_inputs(ensemble, target, h)?;
    let grads = particle_gradients(ensemble, target, &Batches::Shared(batch.to_vec()))?;
    let terms = UpdateTerms {
        langevin_drift: None,
        kernel: Some(kernel),
        diffusion: None,
    };
    apply(ensemble, &grads, h, terms, Noise::Zero)
}

/// Euler step of the deterministic interacting-particle system.
pub fn pos_step_deterministic(
    ensemble: &ParticleEnsemble,
    target: &TargetModel,
    h: f64,
    beta: f64,
    kernel: &KernelSpec,
    batch: &[usize],
) -> Result<ParticleEnsemble> {
    check_inputs(ensemble, target, h)?;
    check_beta(beta)?;
    let grads = particle_gradients(ensemble, target, &Batches::Shared(batch.to_vec()))?;
    let terms = UpdateTerms {
        langevin_drift: Some(1.0 / beta),
        kernel: Some(kernel),
        diffusion: None,
    };
    apply(ensemble, &grads, h, terms, Noise::Zero)
}

pub fn spos_step(
    ensemble: &ParticleEnsemble,
    target: &TargetModel,
    h: f64,
    beta: f64,
    kernel: &KernelSpec,
    batch: &[usize],
    noise: Noise<'_>,
) -> Result<ParticleEnsemble> {
    check_inputs(ensemble, target, h)?;
    check_beta(beta)?;
    let grads = particle_gradients(ensemble, target, &Batches::Shared(batch.to_vec()))?;
    let inv_beta = 1.0 / beta;
    let terms = UpdateTerms {
        langevin_drift: Some(inv_beta),
        kernel: Some(kernel),
        diffusion: Some(inv_beta),
    };
    apply(ensemble, &grads, h, terms, noise)
}
