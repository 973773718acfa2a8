//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Unknown or repeated keys are errors so typos never silently fall back to a
//! default. Keys a file leaves out take the shipped defaults of the experiment
//! it names. [`ExperimentConfig::to_config_string`] writes every key, and its
//! output parses back to an identical config.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, DEFAULT_BANDWIDTH_FLOOR};
use crate::samplers::{Algorithm, BatchSchedule, SamplerConfig, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    GaussianSweep,
    MSweep,
    Multimode,
    PosteriorGaussian,
    EpdCompare,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::GaussianSweep,
        ExperimentKind::MSweep,
        ExperimentKind::Multimode,
        ExperimentKind::PosteriorGaussian,
        ExperimentKind::EpdCompare,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::GaussianSweep => "gaussian-sweep",
            ExperimentKind::MSweep => "m-sweep",
            ExperimentKind::Multimode => "multimode",
            ExperimentKind::PosteriorGaussian => "posterior-gaussian",
            ExperimentKind::EpdCompare => "epd-compare",
        }
    }

    /// The shipped default config text for this experiment.
    pub fn shipped_config(&self) -> &'static str {
        match self {
            ExperimentKind::GaussianSweep => include_str!("../../configs/gaussian-sweep.conf"),
            ExperimentKind::MSweep => include_str!("../../configs/m-sweep.conf"),
            ExperimentKind::Multimode => include_str!("../../configs/multimode.conf"),
            ExperimentKind::PosteriorGaussian => include_str!("../../configs/posterior-gaussian.conf"),
            ExperimentKind::EpdCompare => include_str!("../../configs/epd-compare.conf"),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::parse("experiment", format!("unknown experiment `{}`", s.trim())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median heuristic, re-estimated every step.
    Median,
    /// Fixed `bandwidth_sq`.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// All `N` terms.
    Full,
    Size(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepScheduleKind {
    Fixed,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchScheduleKind {
    Fixed,
    Growing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub algorithms: Vec<Algorithm>,
    /// Particle counts `M`.
    pub particles: Vec<usize>,
    /// Iteration budget `T`.
    pub iterations: usize,
    /// Initial step size `h0`.
    pub step_size: f64,
    pub step_schedule: StepScheduleKind,
    pub batch_size: BatchSize,
    pub batch_schedule: BatchScheduleKind,
    pub beta: f64,
    pub bandwidth: Bandwidth,
    pub bandwidth_floor: f64,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub diagnostics_every: usize,
    /// Record every iteration up to this one as well.
    pub dense_until: usize,
    /// Early checkpoint reported in summaries.
    pub early_iteration: usize,
    pub init_mean: f64,
    pub init_std: f64,
    /// Initial spread of the dispersed regime in `epd-compare`.
    pub dispersed_std: f64,
    pub target_mean: f64,
    pub target_variance: f64,
    pub data_size: usize,
    pub data_mean: f64,
    pub data_seed: u64,
    pub mode_radius: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::GaussianSweep,
            algorithms: vec![Algorithm::Spos, Algorithm::Svgd],
            particles: vec![50, 100, 200, 300, 500, 800],
            iterations: 1000,
            step_size: 0.03,
            step_schedule: StepScheduleKind::Fixed,
            batch_size: BatchSize::Full,
            batch_schedule: BatchScheduleKind::Fixed,
            beta: 1.0,
            bandwidth: Bandwidth::Median,
            bandwidth_floor: DEFAULT_BANDWIDTH_FLOOR,
            seeds: (0..10).collect(),
            out_dir: None,
            diagnostics_every: 10,
            dense_until: 0,
            early_iteration: 100,
            init_mean: 0.0,
            init_std: 1.0,
            dispersed_std: 1.0,
            target_mean: 2.0,
            target_variance: 1.0,
            data_size: 1000,
            data_mean: 2.0,
            data_seed: 0,
            mode_radius: 0.35,
        }
    }
}

const KEYS: [&str; 26] = [
    "experiment",
    "algorithms",
    "particles",
    "iterations",
    "step_size",
    "step_schedule",
    "batch_size",
    "batch_schedule",
    "beta",
    "bandwidth",
    "bandwidth_floor",
    "seeds",
    "out_dir",
    "diagnostics_every",
    "dense_until",
    "early_iteration",
    "init_mean",
    "init_std",
    "dispersed_std",
    "target_mean",
    "target_variance",
    "data_size",
    "data_mean",
    "data_seed",
    "mode_radius",
    "seed_offset",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::parse(format!("key `{key}`"), format!("`{value}`: {e}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

/// Seed lists accept `a, b, c` and half-open ranges `a..b`.
fn seed_list(value: &str) -> Result<Vec<u64>> {
    match value.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi): (u64, u64) = (num("seeds", lo.trim())?, num("seeds", hi.trim())?);
            Ok((lo..hi).collect())
        }
        None => list("seeds", value),
    }
}

/// `(key, value)` pairs, rejecting malformed lines and repeats.
fn assignments(text: &str) -> Result<Vec<(&str, &str)>> {
    let mut out: Vec<(&str, &str)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {}", n + 1), format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::parse(format!("line {}", n + 1), format!("key `{key}` set twice")));
        }
        out.push((key, value.trim()));
    }
    Ok(out)
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Parses config text. Unset keys come from the shipped config of the
    /// named experiment, or from [`ExperimentConfig::default`] if none is named.
    pub fn parse(text: &str) -> Result<Self> {
        let assignments = assignments(text)?;
        let base = match assignments.iter().find(|(k, _)| *k == "experiment") {
            Some((_, v)) => Self::shipped(v.parse()?),
            None => Self::default(),
        };
        Self::apply_all(base, &assignments)
    }

    /// The shipped defaults for `kind`.
    pub fn shipped(kind: ExperimentKind) -> Self {
        assignments(kind.shipped_config())
            .and_then(|a| Self::apply_all(Self::default(), &a))
            .expect("shipped configs are valid")
    }

    fn apply_all(mut config: Self, assignments: &[(&str, &str)]) -> Result<Self> {
        for (key, value) in assignments {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Assigns one key. `seed_offset = n` shifts every seed by `n`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "experiment" => self.experiment = value.parse()?,
            "algorithms" => self.algorithms = list(key, value)?,
            "particles" => self.particles = list(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "step_size" => self.step_size = num(key, value)?,
            "step_schedule" => {
                self.step_schedule = match value {
                    "fixed" => StepScheduleKind::Fixed,
                    "decreasing" => StepScheduleKind::Decreasing,
                    _ => return Err(Error::parse("key `step_schedule`", format!("expected fixed|decreasing, got `{value}`"))),
                }
            }
            "batch_size" => {
                self.batch_size = if value == "full" {
                    BatchSize::Full
                } else {
                    BatchSize::Size(num(key, value)?)
                }
            }
            "batch_schedule" => {
                self.batch_schedule = match value {
                    "fixed" => BatchScheduleKind::Fixed,
                    "growing" => BatchScheduleKind::Growing,
                    _ => return Err(Error::parse("key `batch_schedule`", format!("expected fixed|growing, got `{value}`"))),
                }
            }
            "beta" => self.beta = num(key, value)?,
            "bandwidth" => {
                self.bandwidth = if value == "median" {
                    Bandwidth::Median
                } else {
                    Bandwidth::Fixed(num(key, value)?)
                }
            }
            "bandwidth_floor" => self.bandwidth_floor = num(key, value)?,
            "seeds" => self.seeds = seed_list(value)?,
            "out_dir" => self.out_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "diagnostics_every" => self.diagnostics_every = num(key, value)?,
            "dense_until" => self.dense_until = num(key, value)?,
            "early_iteration" => self.early_iteration = num(key, value)?,
            "init_mean" => self.init_mean = num(key, value)?,
            "init_std" => self.init_std = num(key, value)?,
            "dispersed_std" => self.dispersed_std = num(key, value)?,
            "target_mean" => self.target_mean = num(key, value)?,
            "target_variance" => self.target_variance = num(key, value)?,
            "data_size" => self.data_size = num(key, value)?,
            "data_mean" => self.data_mean = num(key, value)?,
            "data_seed" => self.data_seed = num(key, value)?,
            "mode_radius" => self.mode_radius = num(key, value)?,
            "seed_offset" => {
                let offset: u64 = num(key, value)?;
                self.apply_seed_offset(offset);
            }
            _ => {
                return Err(Error::parse(
                    format!("key `{key}`"),
                    format!("unknown key; expected one of {}", KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override string. Cross-field constraints are
    /// left to [`ExperimentConfig::validate`], so several overrides can be
    /// applied before checking.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::parse("override", format!("expected key=value, got `{assignment}`")))?;
        self.set(key.trim(), value)
    }

    pub fn apply_seed_offset(&mut self, offset: u64) {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.seeds.is_empty() {
            return fail("seed list must not be empty".into());
        }
        if self.algorithms.is_empty() {
            return fail("algorithm list must not be empty".into());
        }
        if self.particles.is_empty() || self.particles.contains(&0) {
            return fail("particle counts must be a non-empty list of positive integers".into());
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if self.diagnostics_every == 0 {
            return fail("diagnostics_every must be at least 1".into());
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return fail(format!("step_size must be positive, got {}", self.step_size));
        }
        if !(self.beta > 0.0) {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        if let Bandwidth::Fixed(bw) = self.bandwidth {
            KernelSpec::fixed(bw)?;
        }
        KernelSpec::median_heuristic_with_floor(self.bandwidth_floor)?;
        if self.batch_size == BatchSize::Size(0) {
            return fail("batch_size must be positive".into());
        }
        if !(self.init_std >= 0.0 && self.dispersed_std >= 0.0) {
            return fail("initial spreads must be non-negative".into());
        }
        if !(self.target_variance > 0.0) {
            return fail(format!("target_variance must be positive, got {}", self.target_variance));
        }
        if self.data_size == 0 {
            return fail("data_size must be positive".into());
        }
        if !(self.mode_radius > 0.0) {
            return fail(format!("mode_radius must be positive, got {}", self.mode_radius));
        }
        let uses_early = matches!(self.experiment, ExperimentKind::GaussianSweep | ExperimentKind::PosteriorGaussian);
        if uses_early
            && (self.early_iteration == 0
                || self.early_iteration > self.iterations
                || (!self.early_iteration.is_multiple_of(self.diagnostics_every) && self.early_iteration > self.dense_until))
        {
            return fail(format!(
                "early_iteration {} must lie in 1..=T and be a recorded iteration",
                self.early_iteration
            ));
        }
        if self.experiment == ExperimentKind::EpdCompare && self.particles.len() != 1 {
            return fail("epd-compare takes a single particle count".into());
        }
        Ok(())
    }

    /// The per-run sampler configuration for `algorithm` and `seed`.
    pub fn sampler_config(&self, algorithm: Algorithm, seed: u64, num_terms: usize) -> Result<SamplerConfig> {
        let kernel = match self.bandwidth {
            Bandwidth::Median => KernelSpec::median_heuristic_with_floor(self.bandwidth_floor)?,
            Bandwidth::Fixed(bw) => KernelSpec::fixed(bw)?,
        };
        let b0 = match self.batch_size {
            BatchSize::Full => num_terms,
            BatchSize::Size(b) => b,
        };
        let mut config = SamplerConfig::new(algorithm, self.iterations, self.step_size);
        config.beta = self.beta;
        config.step_schedule = match self.step_schedule {
            StepScheduleKind::Fixed => StepSchedule::Fixed(self.step_size),
            StepScheduleKind::Decreasing => StepSchedule::Decreasing(self.step_size),
        };
        config.batch_schedule = match self.batch_schedule {
            BatchScheduleKind::Fixed => BatchSchedule::Fixed(b0),
            BatchScheduleKind::Growing => BatchSchedule::Growing(b0),
        };
        config.kernel = kernel;
        config.seed = seed;
        config.diagnostics_every = self.diagnostics_every;
        config.dense_until = self.dense_until;
        Ok(config)
    }

    /// Renders every key in canonical order.
    pub fn to_config_string(&self) -> String {
        let step_schedule = match self.step_schedule {
            StepScheduleKind::Fixed => "fixed",
            StepScheduleKind::Decreasing => "decreasing",
        };
        let batch_schedule = match self.batch_schedule {
            BatchScheduleKind::Fixed => "fixed",
            BatchScheduleKind::Growing => "growing",
        };
        let batch_size = match self.batch_size {
            BatchSize::Full => "full".to_string(),
            BatchSize::Size(b) => b.to_string(),
        };
        let bandwidth = match self.bandwidth {
            Bandwidth::Median => "median".to_string(),
            Bandwidth::Fixed(bw) => format!("{bw:?}"),
        };
        let out_dir = self.out_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let lines = [
            ("experiment", self.experiment.to_string()),
            ("algorithms", join(&self.algorithms)),
            ("particles", join(&self.particles)),
            ("iterations", self.iterations.to_string()),
            ("step_size", format!("{:?}", self.step_size)),
            ("step_schedule", step_schedule.into()),
            ("batch_size", batch_size),
            ("batch_schedule", batch_schedule.into()),
            ("beta", format!("{:?}", self.beta)),
            ("bandwidth", bandwidth),
            ("bandwidth_floor", format!("{:?}", self.bandwidth_floor)),
            ("seeds", join(&self.seeds)),
            ("out_dir", out_dir),
            ("diagnostics_every", self.diagnostics_every.to_string()),
            ("dense_until", self.dense_until.to_string()),
            ("early_iteration", self.early_iteration.to_string()),
            ("init_mean", format!("{:?}", self.init_mean)),
            ("init_std", format!("{:?}", self.init_std)),
            ("dispersed_std", format!("{:?}", self.dispersed_std)),
            ("target_mean", format!("{:?}", self.target_mean)),
            ("target_variance", format!("{:?}", self.target_variance)),
            ("data_size", self.data_size.to_string()),
            ("data_mean", format!("{:?}", self.data_mean)),
            ("data_seed", self.data_seed.to_string()),
            ("mode_radius", format!("{:?}", self.mode_radius)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
