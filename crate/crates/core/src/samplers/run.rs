//! The iteration loop producing a [`RunTrace`].

use crate::diagnostics::{self, DiagnosticRecord};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::rng::{substream, StreamPurpose};
use crate::samplers::schedule::{batch_size, step_size, BatchSchedule, StepSchedule};
use crate::samplers::step::{
    pos_step_deterministic, sgld_step, spos_step, svgd_step, Algorithm, Batches, Noise,
};
use crate::targets::{sample_batch, TargetModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub algorithm: Algorithm,
    /// Inverse temperature; unused by SVGD.
    pub beta: f64,
    pub step_schedule: StepSchedule,
    pub batch_schedule: BatchSchedule,
    pub kernel: KernelSpec,
    /// Number of iterations `T`.
    pub iterations: usize,
    pub seed: u64,
    /// Record diagnostics every this many iterations (and always at `T`).
    pub diagnostics_every: usize,
    /// Also record every iteration `k <= dense_until`, for resolving early
    /// transients without a fine cadence over the whole run.
    pub dense_until: usize,
    /// Also record the initial ensemble at iteration 0.
    pub record_initial: bool,
}

impl SamplerConfig {
    pub fn new(algorithm: Algorithm, iterations: usize, step_size: f64) -> Self {
        Self {
            algorithm,
            beta: 1.0,
            step_schedule: StepSchedule::Fixed(step_size),
            batch_schedule: BatchSchedule::Fixed(1),
            kernel: KernelSpec::median_heuristic(),
            iterations,
            seed: 0,
            diagnostics_every: 1,
            dense_until: 0,
            record_initial: false,
        }
    }

    pub fn validate(&self, target: &TargetModel) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iteration budget T must be at least 1".into()));
        }
        if self.diagnostics_every == 0 {
            return Err(Error::Config("diagnostics cadence must be at least 1".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        self.step_schedule.validate()?;
        self.batch_schedule.validate(target.num_terms())
    }
}

/// How the initial ensemble is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Explicit(ParticleEnsemble),
    /// `M` particles with coordinates i.i.d. `N(mean, std^2)`, drawn from the run seed.
    Gaussian { num_particles: usize, mean: f64, std: f64 },
}

impl InitSpec {
    pub fn build(&self, dim: usize, seed: u64) -> Result<ParticleEnsemble> {
        match self {
            InitSpec::Explicit(e) => Ok(e.clone()),
            InitSpec::Gaussian { num_particles, mean, std } => {
                ParticleEnsemble::gaussian(*num_particles, dim, *mean, *std, seed)
            }
        }
    }
}

/// Which diagnostics to compute at each recorded iteration.
pub struct DiagnosticPlan {
    /// Test function and its reference expectation.
    pub test_fn: Option<(fn(&[f64]) -> f64, f64)>,
    pub w1_quantile: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub modes: Option<(Vec<Vec<f64>>, f64)>,
}

impl DiagnosticPlan {
    /// EPD only.
    pub fn epd_only() -> Self {
        Self {
            test_fn: None,
            w1_quantile: None,
            modes: None,
        }
    }

    /// Everything the target's reference supports: `θ^2` error and `W_1` for
    /// Gaussian references, mode coverage for mode lists.
    pub fn for_target(target: &TargetModel, mode_radius: f64) -> Self {
        let reference = target.reference();
        let one_dim = target.dim() == 1;
        let quantile = if one_dim { reference.quantile_fn() } else { None };
        Self {
            test_fn: reference
                .second_moment()
                .filter(|_| one_dim)
                .map(|m2| (diagnostics::squared_norm_fn as fn(&[f64]) -> f64, m2)),
            w1_quantile: quantile.map(|q| Box::new(q) as Box<dyn Fn(f64) -> f64 + Send + Sync>),
            modes: reference.mode_centers().map(|c| (c.to_vec(), mode_radius)),
        }
    }

    pub fn record(&self, ensemble: &ParticleEnsemble) -> Result<DiagnosticRecord> {
        let (test_fn_mean, test_fn_error) = match self.test_fn {
            Some((f, reference)) => {
                let mean = diagnostics::test_fn_mean(ensemble, f);
                (Some(mean), Some((mean - reference).abs()))
            }
            None => (None, None),
        };
        let w1 = match &self.w1_quantile {
            Some(q) if ensemble.dim() == 1 => Some(diagnostics::w1_empirical_1d(&ensemble.first_coordinates(), q)?),
            _ => None,
        };
        Ok(DiagnosticRecord {
            iteration: ensemble.iteration(),
            epd: diagnostics::epd(ensemble),
            test_fn_error,
            w1,
            modes_covered: self
                .modes
                .as_ref()
                .map(|(centers, radius)| diagnostics::mode_coverage(ensemble, centers, *radius)),
            test_fn_mean,
        })
    }
}

/// Diagnostics history and final state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<DiagnosticRecord>,
    /// Last valid ensemble; its iteration is `T` unless the run diverged.
    pub final_ensemble: ParticleEnsemble,
    pub config: SamplerConfig,
    /// Set when the run stopped early on a non-finite state.
    pub divergence: Option<String>,
}

impl RunTrace {
    pub fn record_at(&self, iteration: usize) -> Option<&DiagnosticRecord> {
        self.records.iter().find(|r| r.iteration == iteration)
    }
}

/// Advances `ensemble` by one iteration of the configured algorithm.
pub fn step_once(
    config: &SamplerConfig,
    target: &TargetModel,
    ensemble: &ParticleEnsemble,
) -> Result<ParticleEnsemble> {
    let k = ensemble.iteration();
    let n = target.num_terms();
    let h = step_size(k, &config.step_schedule);
    let b = batch_size(k, &config.batch_schedule, n);
    let noise = Noise::Seeded(config.seed);
    let shared_batch = || -> Result<Vec<usize>> {
        if b == n {
            return Ok((0..n).collect());
        }
        sample_batch(n, b, &mut substream(config.seed, StreamPurpose::SharedBatch, 0, k as u64))
    };
    match config.algorithm {
        Algorithm::Sgld => {
            let batches = if b == n {
                Batches::full(n)
            } else {
                Batches::PerParticle(
                    (0..ensemble.num_particles())
                        .map(|i| {
                            sample_batch(
                                n,
                                b,
                                &mut substream(config.seed, StreamPurpose::ParticleBatch, i as u64, k as u64),
                            )
                        })
                        .collect::<Result<_>>()?,
                )
            };
            sgld_step(ensemble, target, h, config.beta, &batches, noise)
        }
        Algorithm::Svgd => svgd_step(ensemble, target, h, &config.kernel, &shared_batch()?),
        Algorithm::Pos => pos_step_deterministic(ensemble, target, h, config.beta, &config.kernel, &shared_batch()?),
        Algorithm::Spos => spos_step(ensemble, target, h, config.beta, &config.kernel, &shared_batch()?, noise),
    }
}

/// Runs `config.iterations` steps from `init`, recording diagnostics at the
/// configured cadence. A divergence ends the run early; the trace keeps every
/// record taken before it and carries the error message.
pub fn run_sampler(
    config: &SamplerConfig,
    target: &TargetModel,
    init: &InitSpec,
    plan: &DiagnosticPlan,
) -> Result<RunTrace> {
    config.validate(target)?;
    let mut ensemble = init.build(target.dim(), config.seed)?;
    if ensemble.dim() != target.dim() {
        return Err(Error::Precondition(format!(
            "initial ensemble has dimension {}, target has {}",
            ensemble.dim(),
            target.dim()
        )));
    }
    ensemble.set_iteration(0);
    let mut records = Vec::with_capacity(config.iterations / config.diagnostics_every + 2);
    if config.record_initial {
        records.push(plan.record(&ensemble)?);
    }
    let mut divergence = None;
    for _ in 0..config.iterations {
        match step_once(config, target, &ensemble) {
            Ok(next) => ensemble = next,
            Err(err @ Error::Divergence { .. }) => {
                divergence = Some(err.to_string());
                break;
            }
            Err(err) => return Err(err),
        }
        let k = ensemble.iteration();
        if k % config.diagnostics_every == 0 || k <= config.dense_until || k == config.iterations {
            records.push(plan.record(&ensemble)?);
        }
    }
    Ok(RunTrace {
        records,
        final_ensemble: ensemble,
        config: config.clone(),
        divergence,
    })
}
