//! Particle-optimization Bayesian sampling.
//!
//! Four particle samplers share one set of ingredients: additive potentials
//! with per-datum gradients ([`targets`]), the RBF kernel ([`kernels`]) and
//! counter-based random substreams ([`rng`]).
//!
//! * SGLD: independent Langevin particles.
//! * SVGD: deterministic kernel-interacting particles.
//! * POS: SVGD plus the Langevin drift.
//! * SPOS: POS plus Gaussian noise.
//!
//! [`diagnostics`] measures particle spread, test-function error, 1-D
//! Wasserstein distance and mode coverage; [`experiment`] runs the synthetic
//! studies and writes CSV.

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod rng;
pub mod samplers;
pub mod targets;

pub use diagnostics::DiagnosticRecord;
pub use ensemble::ParticleEnsemble;
pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use samplers::{Algorithm, RunTrace, SamplerConfig};
pub use targets::TargetModel;
