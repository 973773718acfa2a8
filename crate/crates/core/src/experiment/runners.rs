use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::csv::{Table, Value};
use super::stats::{mean, spearman, standard_error};
use crate::diagnostics::DiagnosticRecord;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::samplers::{run_sampler, Algorithm, DiagnosticPlan, InitSpec, RunTrace};
use crate::targets::{conjugate_posterior_target, gaussian1d_target, gaussian_data, multimode1d_target, TargetModel};

/// Name of the config echo written into every output directory.
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.conf";

/// Files written by one experiment, in write order.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// One independent sampler run.
struct Job {
    algorithm: Algorithm,
    num_particles: usize,
    seed: u64,
    init: InitSpec,
}

/// Runs every job (concurrently when the rayon pool has several threads) and
/// returns the traces in job order. Any divergence fails the experiment.
fn run_jobs(
    config: &ExperimentConfig,
    target: &TargetModel,
    plan: &DiagnosticPlan,
    jobs: &[Job],
    record_initial: bool,
) -> Result<Vec<RunTrace>> {
    jobs.par_iter()
        .map(|job| {
            let mut sampler = config.sampler_config(job.algorithm, job.seed, target.num_terms())?;
            sampler.record_initial = record_initial;
            let trace = run_sampler(&sampler, target, &job.init, plan)?;
            match trace.divergence {
                Some(detail) => Err(Error::Divergence {
                    iteration: trace.final_ensemble.iteration() + 1,
                    detail: format!("{} with M = {}, seed {}: {detail}", job.algorithm, job.num_particles, job.seed),
                }),
                None => Ok(trace),
            }
        })
        .collect()
}

fn gaussian_jobs(config: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &algorithm in &config.algorithms {
        for &m in &config.particles {
            for &seed in &config.seeds {
                jobs.push(Job {
                    algorithm,
                    num_particles: m,
                    seed,
                    init: InitSpec::Gaussian {
                        num_particles: m,
                        mean: config.init_mean,
                        std: config.init_std,
                    },
                });
            }
        }
    }
    jobs
}

/// Per-iteration mean and standard error of `metric` across seed traces that
/// share one recording grid.
fn aggregate(traces: &[&RunTrace], metric: impl Fn(&DiagnosticRecord) -> f64) -> Vec<(usize, f64, f64)> {
    let grid: Vec<usize> = traces[0].records.iter().map(|r| r.iteration).collect();
    grid.iter()
        .enumerate()
        .map(|(idx, &k)| {
            let values: Vec<f64> = traces.iter().map(|t| metric(&t.records[idx])).collect();
            (k, mean(&values), standard_error(&values))
        })
        .collect()
}

fn test_error(r: &DiagnosticRecord) -> f64 {
    r.test_fn_error.expect("plan records the test-function error")
}

/// Mean over seeds of the test-function error at iteration `k`.
fn mean_error_at(traces: &[&RunTrace], k: usize) -> f64 {
    let values: Vec<f64> = traces
        .iter()
        .map(|t| test_error(t.record_at(k).expect("checkpoint is on the recording grid")))
        .collect();
    mean(&values)
}

/// Splits `traces` (in job order) into consecutive groups of one per seed.
fn by_seed_groups(traces: &[RunTrace], seeds: usize) -> Vec<Vec<&RunTrace>> {
    traces.chunks(seeds).map(|c| c.iter().collect()).collect()
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.dir.join(name);
        table.write(&path)?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs the configured experiment into `out_dir`, creating it if needed.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut echo = config.clone();
    echo.out_dir = Some(out_dir.to_path_buf());
    let echo_path = out_dir.join(RESOLVED_CONFIG_FILE);
    fs::write(&echo_path, echo.to_config_string()).map_err(|e| Error::io(&echo_path, e))?;
    let mut writer = Writer {
        dir: out_dir.to_path_buf(),
        files: vec![echo_path],
    };
    match config.experiment {
        ExperimentKind::GaussianSweep => run_gaussian_sweep(config, &mut writer)?,
        ExperimentKind::MSweep => run_m_sweep(config, &mut writer)?,
        ExperimentKind::Multimode => run_multimode(config, &mut writer)?,
        ExperimentKind::PosteriorGaussian => run_posterior_gaussian(config, &mut writer)?,
        ExperimentKind::EpdCompare => run_epd_compare(config, &mut writer)?,
    }
    Ok(ExperimentOutput {
        out_dir: out_dir.to_path_buf(),
        files: writer.files,
    })
}

/// Error of `E[θ^2]` against the Gaussian target over iterations, one trace
/// file per `(algorithm, M)` plus a summary at the early checkpoint and at `T`.
fn run_gaussian_sweep(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let target = gaussian1d_target(config.target_mean, config.target_variance)?;
    let plan = DiagnosticPlan::for_target(&target, config.mode_radius);
    let jobs = gaussian_jobs(config);
    let traces = run_jobs(config, &target, &plan, &jobs, false)?;
    let (early, t) = (config.early_iteration, config.iterations);
    let mut summary = Table::new([
        "algorithm".to_string(),
        "M".to_string(),
        format!("err_at_T{early}"),
        format!("err_at_T{t}"),
        format!("w1_at_T{t}"),
    ]);
    let groups = by_seed_groups(&traces, config.seeds.len());
    let mut group_iter = groups.iter();
    for &algorithm in &config.algorithms {
        for &m in &config.particles {
            let group = group_iter.next().expect("one group per (algorithm, M)");
            let mut table = Table::new(["iteration", "mean_err", "stderr_err"]);
            for (k, mean_err, stderr_err) in aggregate(group, test_error) {
                table.push(vec![k.into(), mean_err.into(), stderr_err.into()]);
            }
            writer.write(&format!("{}_{algorithm}_M{m}.csv", config.experiment), &table)?;
            let w1: Vec<f64> = group
                .iter()
                .map(|tr| tr.record_at(t).and_then(|r| r.w1).expect("W1 is recorded at T"))
                .collect();
            summary.push(vec![
                algorithm.as_str().into(),
                m.into(),
                mean_error_at(group, early).into(),
                mean_error_at(group, t).into(),
                mean(&w1).into(),
            ]);
        }
    }
    writer.write(&format!("{}_summary.csv", config.experiment), &summary)
}

/// Final error against `M`, one file per algorithm plus the rank correlation.
fn run_m_sweep(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let target = gaussian1d_target(config.target_mean, config.target_variance)?;
    let plan = DiagnosticPlan::for_target(&target, config.mode_radius);
    let jobs = gaussian_jobs(config);
    let traces = run_jobs(config, &target, &plan, &jobs, false)?;
    let groups = by_seed_groups(&traces, config.seeds.len());
    let mut group_iter = groups.iter();
    let mut summary = Table::new(["algorithm", "spearman_M_err"]);
    for &algorithm in &config.algorithms {
        let mut table = Table::new(["M", "mean_err", "stderr_err"]);
        let mut errors = Vec::new();
        for &m in &config.particles {
            let group = group_iter.next().expect("one group per (algorithm, M)");
            let finals: Vec<f64> = group
                .iter()
                .map(|tr| test_error(tr.record_at(config.iterations).expect("T is recorded")))
                .collect();
            let mean_err = mean(&finals);
            errors.push(mean_err);
            table.push(vec![m.into(), mean_err.into(), standard_error(&finals).into()]);
        }
        writer.write(&format!("{}_{algorithm}.csv", config.experiment), &table)?;
        let ms: Vec<f64> = config.particles.iter().map(|&m| m as f64).collect();
        summary.push(vec![algorithm.as_str().into(), spearman(&ms, &errors).into()]);
    }
    writer.write(&format!("{}_summary.csv", config.experiment), &summary)
}

/// Final positions on the multi-mode density and the number of modes reached.
///
/// The positions file for each `(algorithm, M)` holds the first seed's run;
/// the summary lists every seed.
fn run_multimode(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let target = multimode1d_target();
    let plan = DiagnosticPlan::for_target(&target, config.mode_radius);
    let jobs = gaussian_jobs(config);
    let traces = run_jobs(config, &target, &plan, &jobs, false)?;
    let mut summary = Table::new(["algorithm", "M", "seed", "modes_covered"]);
    let groups = by_seed_groups(&traces, config.seeds.len());
    let mut group_iter = groups.iter();
    for &algorithm in &config.algorithms {
        for &m in &config.particles {
            let group = group_iter.next().expect("one group per (algorithm, M)");
            let mut positions = Table::new(["particle_index", "theta"]);
            for (i, theta) in group[0].final_ensemble.first_coordinates().into_iter().enumerate() {
                positions.push(vec![i.into(), theta.into()]);
            }
            writer.write(&format!("{}_{algorithm}_M{m}.csv", config.experiment), &positions)?;
            for (trace, &seed) in group.iter().zip(&config.seeds) {
                let covered = trace
                    .records
                    .last()
                    .and_then(|r| r.modes_covered)
                    .expect("plan records mode coverage");
                summary.push(vec![algorithm.as_str().into(), m.into(), Value::Int(seed as i64), covered.into()]);
            }
        }
    }
    writer.write(&format!("{}_summary.csv", config.experiment), &summary)
}

/// Error of `E[θ^2]` under the conjugate posterior, one file per algorithm
/// covering the whole `M` grid, plus posterior-mean estimates.
fn run_posterior_gaussian(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let data = gaussian_data(config.data_size, config.data_mean, config.data_seed);
    let target = conjugate_posterior_target(&data)?;
    let reference = target.reference();
    let (ref_mean, ref_sd) = (
        reference.mean().expect("conjugate reference is Gaussian"),
        reference.variance().expect("conjugate reference is Gaussian").sqrt(),
    );
    let plan = DiagnosticPlan::for_target(&target, config.mode_radius);
    let jobs = gaussian_jobs(config);
    let traces = run_jobs(config, &target, &plan, &jobs, false)?;
    let early = config.early_iteration;
    let mut summary = Table::new([
        "algorithm".to_string(),
        "M".to_string(),
        "posterior_mean_estimate".to_string(),
        "reference_mean".to_string(),
        "reference_sd".to_string(),
        format!("err_at_k{early}"),
        format!("err_at_T{}", config.iterations),
    ]);
    let groups = by_seed_groups(&traces, config.seeds.len());
    let mut group_iter = groups.iter();
    for &algorithm in &config.algorithms {
        let mut table = Table::new(["iteration", "M", "mean_err"]);
        for &m in &config.particles {
            let group = group_iter.next().expect("one group per (algorithm, M)");
            for (k, mean_err, _) in aggregate(group, test_error) {
                table.push(vec![k.into(), m.into(), mean_err.into()]);
            }
            let estimates: Vec<f64> = group.iter().map(|t| t.final_ensemble.mean()[0]).collect();
            summary.push(vec![
                algorithm.as_str().into(),
                m.into(),
                mean(&estimates).into(),
                ref_mean.into(),
                ref_sd.into(),
                mean_error_at(group, early).into(),
                mean_error_at(group, config.iterations).into(),
            ]);
        }
        writer.write(&format!("{}_{algorithm}.csv", config.experiment), &table)?;
    }
    writer.write(&format!("{}_summary.csv", config.experiment), &summary)
}

/// Seed-averaged particle spread from coincident and from dispersed starts.
fn run_epd_compare(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let target = gaussian1d_target(config.target_mean, config.target_variance)?;
    let plan = DiagnosticPlan::epd_only();
    let m = config.particles[0];
    let regimes = [("coincident", 0.0), ("dispersed", config.dispersed_std)];
    let mut jobs = Vec::new();
    for &algorithm in &config.algorithms {
        for (_, std) in regimes {
            for &seed in &config.seeds {
                let init = if std == 0.0 {
                    InitSpec::Explicit(ParticleEnsemble::from_scalars(&vec![config.init_mean; m])?)
                } else {
                    InitSpec::Gaussian {
                        num_particles: m,
                        mean: config.init_mean,
                        std,
                    }
                };
                jobs.push(Job {
                    algorithm,
                    num_particles: m,
                    seed,
                    init,
                });
            }
        }
    }
    let traces = run_jobs(config, &target, &plan, &jobs, true)?;
    let mut table = Table::new(["iteration", "algorithm", "init_regime", "mean_epd", "stderr_epd"]);
    let groups = by_seed_groups(&traces, config.seeds.len());
    let mut group_iter = groups.iter();
    for &algorithm in &config.algorithms {
        for (regime, _) in regimes {
            let group = group_iter.next().expect("one group per (algorithm, regime)");
            for (k, mean_epd, stderr_epd) in aggregate(group, |r| r.epd) {
                table.push(vec![
                    k.into(),
                    algorithm.as_str().into(),
                    regime.into(),
                    mean_epd.into(),
                    stderr_epd.into(),
                ]);
            }
        }
    }
    writer.write(&format!("{}.csv", config.experiment), &table)
}
