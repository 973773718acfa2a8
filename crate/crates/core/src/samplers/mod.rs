//! Particle update rules, schedules and the run loop.

pub mod run;
pub mod schedule;
pub mod step;

pub use crate::ensemble::ParticleEnsemble;
pub use run::{run_sampler, step_once, DiagnosticPlan, InitSpec, RunTrace, SamplerConfig};
pub use schedule::{batch_size, step_size, BatchSchedule, StepSchedule};
pub use step::{
    interaction_drift, particle_gradients, pos_step_deterministic, sgld_step, spos_step, svgd_step, Algorithm,
    Batches, Noise,
};
