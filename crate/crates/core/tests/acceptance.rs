//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed; the process
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use astro_float::{BigFloat, Consts, RoundingMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sposkit::experiment::{read_csv, run_experiment, CsvData, ExperimentConfig, ExperimentKind};
use sposkit::kernels::{kernel_eval, kernel_grad, KernelSpec};
use sposkit::samplers::{
    batch_size, interaction_drift, particle_gradients, pos_step_deterministic, sgld_step, spos_step, step_size,
    svgd_step, BatchSchedule, Batches, Noise, StepSchedule,
};
use sposkit::targets::{
    conjugate_posterior_target, gaussian1d_target, gaussian_data, multimode1d_target, stochastic_gradient, Potential,
    Reference, TargetModel,
};
use sposkit::ParticleEnsemble;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

/// `U(θ) = Σ_c a_c (θ_c - b_c)^2 / 2 + s_c θ_c^4 / 4` as two additive terms.
struct Quartic {
    a: Vec<f64>,
    b: Vec<f64>,
    s: Vec<f64>,
}

impl Potential for Quartic {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn num_terms(&self) -> usize {
        2
    }
    fn term_gradient(&self, q: usize, theta: &[f64], out: &mut [f64]) {
        for c in 0..self.a.len() {
            out[c] = if q == 0 {
                self.a[c] * (theta[c] - self.b[c])
            } else {
                self.s[c] * theta[c].powi(3)
            };
        }
    }
}

fn reduction_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=3);
        let pos: Vec<f64> = (0..m * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let xi: Vec<f64> = (0..m * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let target = TargetModel::new(
            "quartic",
            Quartic {
                a: (0..d).map(|_| rng.gen_range(0.5..2.0)).collect(),
                b: (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                s: (0..d).map(|_| rng.gen_range(0.0..0.3)).collect(),
            },
            Reference::None,
        );
        let ens = ParticleEnsemble::from_flat(pos, m, d).unwrap();
        let h = rng.gen_range(0.001..0.1);
        let beta = rng.gen_range(0.5..20.0);
        let kernel = KernelSpec::fixed(rng.gen_range(0.2..5.0)).unwrap();
        let full = [0, 1];

        let pos_det = pos_step_deterministic(&ens, &target, h, beta, &kernel, &full).unwrap();
        let spos_zero = spos_step(&ens, &target, h, beta, &kernel, &full, Noise::Zero).unwrap();
        worst = worst.max(rel_err(spos_zero.as_flat(), pos_det.as_flat()));

        // With pinned noise, removing the diffusion term recovers the deterministic step.
        let spos_xi = spos_step(&ens, &target, h, beta, &kernel, &full, Noise::Forced(&xi)).unwrap();
        let scale = (2.0 * h / beta).sqrt();
        let denoised: Vec<f64> = spos_xi.as_flat().iter().zip(&xi).map(|(x, z)| x - scale * z).collect();
        worst = worst.max(rel_err(&denoised, pos_det.as_flat()));

        let drift_free = pos_step_deterministic(&ens, &target, h, f64::INFINITY, &kernel, &full).unwrap();
        let svgd = svgd_step(&ens, &target, h, &kernel, &full).unwrap();
        worst = worst.max(rel_err(drift_free.as_flat(), svgd.as_flat()));

        let grads = particle_gradients(&ens, &target, &Batches::full(2)).unwrap();
        let drift = interaction_drift(&ens, &grads, &kernel);
        let interaction_free: Vec<f64> = spos_zero.as_flat().iter().zip(&drift).map(|(x, v)| x - h * v).collect();
        let sgld = sgld_step(&ens, &target, h, beta, &Batches::full(2), Noise::Zero).unwrap();
        worst = worst.max(rel_err(&interaction_free, sgld.as_flat()));
    }
    check(worst < 1e-12, format!("max relative error {worst:.3e} over 100 states (< 1e-12)"))
}

fn gradient_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let targets = [
        (gaussian1d_target(2.0, 1.0).unwrap(), -4.0, 8.0),
        (conjugate_posterior_target(&gaussian_data(1000, 2.0, 2019)).unwrap(), 1.0, 3.0),
        (multimode1d_target(), -3.0, 3.0),
    ];
    let mut worst_target: f64 = 0.0;
    for (target, lo, hi) in &targets {
        for _ in 0..50 {
            let t: f64 = rng.gen_range(*lo..*hi);
            let step = 1e-5 * t.abs().max(1.0);
            let fd = (target.energy(&[t + step]).unwrap() - target.energy(&[t - step]).unwrap()) / (2.0 * step);
            let g = target.gradient(&[t])[0];
            worst_target = worst_target.max((g - fd).abs() / g.abs().max(1.0));
        }
    }
    let mut worst_kernel: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.gen_range(1..=3);
        let spec = KernelSpec::fixed(rng.gen_range(0.3..4.0)).unwrap();
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let grad = kernel_grad(&z, &spec).unwrap();
        for c in 0..d {
            let step = 1e-6;
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[c] += step;
            zm[c] -= step;
            let fd = (kernel_eval(&zp, &spec).unwrap() - kernel_eval(&zm, &spec).unwrap()) / (2.0 * step);
            worst_kernel = worst_kernel.max((grad[c] - fd).abs() / grad[c].abs().max(1e-3));
        }
    }
    check(
        worst_target < 1e-5 && worst_kernel < 1e-6,
        format!("target FD error {worst_target:.2e} (< 1e-5), kernel FD error {worst_kernel:.2e} (< 1e-6)"),
    )
}

fn unbiased_minibatching() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=6usize {
        let data: Vec<f64> = (0..n).map(|q| (q as f64 * 1.7).sin() * 2.0).collect();
        let target = conjugate_posterior_target(&data).unwrap();
        for theta in [-1.5, 0.4, 2.2] {
            let full = target.gradient(&[theta])[0];
            for b in 1..=n {
                let subsets: Vec<Vec<usize>> = (0u32..1 << n)
                    .filter(|mask| mask.count_ones() as usize == b)
                    .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
                    .collect();
                let avg = subsets
                    .iter()
                    .map(|s| stochastic_gradient(&target, &[theta], s).unwrap()[0])
                    .sum::<f64>()
                    / subsets.len() as f64;
                worst = worst.max((avg - full).abs() / full.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    check(worst < 1e-12, format!("max relative error {worst:.3e} for N <= 6, all B (< 1e-12)"))
}

fn run(kind: ExperimentKind, overrides: &[&str], dir: &Path) -> Result<(), String> {
    let mut config = ExperimentConfig::shipped(kind);
    for o in overrides {
        config.apply_override(o).map_err(|e| e.to_string())?;
    }
    run_experiment(&config, dir).map(|_| ()).map_err(|e| e.to_string())
}

fn csv(dir: &Path, name: &str) -> Result<CsvData, String> {
    read_csv(&dir.join(name)).map_err(|e| e.to_string())
}

fn rows_where<'a>(data: &'a CsvData, column: &str, value: &str) -> Vec<&'a Vec<String>> {
    let idx = data.column_index(column).unwrap();
    data.rows.iter().filter(|r| r[idx] == value).collect()
}

fn cell(data: &CsvData, row: &[String], column: &str) -> f64 {
    row[data.column_index(column).unwrap()].parse().unwrap()
}

fn gaussian_accuracy() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    run(ExperimentKind::GaussianSweep, &["algorithms=spos", "particles=300"], dir.path())?;
    let summary = csv(dir.path(), "gaussian-sweep_summary.csv")?;
    let row = &summary.rows[0];
    let err = cell(&summary, row, "err_at_T1000");
    let w1 = cell(&summary, row, "w1_at_T1000");
    check(err < 0.5 && w1 < 0.3, format!("M = 300, 10 seeds: mean error {err:.4} (< 0.5), mean W1 {w1:.4} (< 0.3)"))
}

fn optimal_m_shape() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    run(ExperimentKind::GaussianSweep, &["algorithms=spos", "particles=50,300,800"], dir.path())?;
    let summary = csv(dir.path(), "gaussian-sweep_summary.csv")?;
    let errs: Vec<f64> = summary.rows.iter().map(|r| cell(&summary, r, "err_at_T1000")).collect();
    check(
        errs[1] <= errs[0] && errs[1] <= errs[2],
        format!(
            "mean error at T = 1000: M=50 {:.4}, M=300 {:.4}, M=800 {:.4} (need M=300 <= both)",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn error_vs_m() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    run(ExperimentKind::MSweep, &[], dir.path())?;
    let summary = csv(dir.path(), "m-sweep_summary.csv")?;
    let rho = cell(&summary, &summary.rows[0], "spearman_M_err");
    let table = csv(dir.path(), "m-sweep_spos.csv")?;
    let errs = table.column_f64("mean_err").map_err(|e| e.to_string())?;
    check(
        rho > 0.6,
        format!("Spearman(M, error) = {rho:.4} (> 0.6); errors {:?}", errs.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>()),
    )
}

fn multimode_escape() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    run(ExperimentKind::Multimode, &[], dir.path())?;
    let summary = csv(dir.path(), "multimode_summary.csv")?;
    let coverage = |alg: &str| -> Vec<usize> {
        rows_where(&summary, "algorithm", alg)
            .iter()
            .map(|r| cell(&summary, r, "modes_covered") as usize)
            .collect()
    };
    let (spos, svgd) = (coverage("spos"), coverage("svgd"));
    check(
        !spos.is_empty() && !svgd.is_empty() && spos.iter().all(|&c| c >= 3) && svgd.iter().all(|&c| c == 1),
        format!("modes covered per seed: SPOS {spos:?} (all >= 3), SVGD {svgd:?} (all = 1)"),
    )
}

fn epd_collapse_vs_floor() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    run(ExperimentKind::EpdCompare, &[], dir.path())?;
    let config = ExperimentConfig::shipped(ExperimentKind::EpdCompare);
    let t = config.iterations;
    let data = csv(dir.path(), "epd-compare.csv")?;
    let curve = |alg: &str, regime: &str| -> BTreeMap<usize, f64> {
        rows_where(&data, "algorithm", alg)
            .into_iter()
            .filter(|r| r[data.column_index("init_regime").unwrap()] == regime)
            .map(|r| (cell(&data, r, "iteration") as usize, cell(&data, r, "mean_epd")))
            .collect()
    };
    let svgd = curve("svgd", "dispersed");
    let (at_t, at_tenth) = (svgd[&t], svgd[&(t / 10)]);
    let spos = curve("spos", "coincident");
    let first: Vec<f64> = (1..=10).map(|k| spos[&k]).collect();
    let first_window = first.iter().sum::<f64>() / first.len() as f64;
    let tail: Vec<f64> = spos.iter().filter(|(&k, _)| 5 * k >= 4 * t).map(|(_, &v)| v).collect();
    let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
    check(
        at_t < 0.5 * at_tenth && plateau > 10.0 * first_window && plateau > 0.0 && spos[&0] == 0.0,
        format!(
            "SVGD EPD(T)/EPD(T/10) = {:.3} (< 0.5); SPOS plateau {plateau:.3} / first window {first_window:.3} = {:.2} (> 10), EPD(0) = {}",
            at_t / at_tenth,
            plateau / first_window,
            spos[&0]
        ),
    )
}

fn conjugate_posterior() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    run(ExperimentKind::PosteriorGaussian, &[], dir.path())?;
    let summary = csv(dir.path(), "posterior-gaussian_summary.csv")?;
    let rows = rows_where(&summary, "algorithm", "spos");
    let mut worst_sd: f64 = 0.0;
    for r in &rows {
        let z = (cell(&summary, r, "posterior_mean_estimate") - cell(&summary, r, "reference_mean")).abs()
            / cell(&summary, r, "reference_sd");
        worst_sd = worst_sd.max(z);
    }
    let early_col = summary.header.iter().find(|h| h.starts_with("err_at_k")).unwrap().clone();
    let (small, large) = (rows.first().unwrap(), rows.last().unwrap());
    let (e_small, e_large) = (cell(&summary, small, &early_col), cell(&summary, large, &early_col));
    check(
        worst_sd < 3.0 && e_large > e_small,
        format!(
            "max |mean estimate - formula mean| = {worst_sd:.3} sd (< 3); {early_col}: M={} {e_small:.4} < M={} {e_large:.4}",
            small[1], large[1]
        ),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let small: [(ExperimentKind, &[&str]); 5] = [
        (ExperimentKind::GaussianSweep, &["iterations=200", "particles=20,60", "seeds=0..4"]),
        (ExperimentKind::MSweep, &["particles=20,40,80", "seeds=0..4"]),
        (ExperimentKind::Multimode, &["iterations=400", "seeds=0..3"]),
        (ExperimentKind::PosteriorGaussian, &["iterations=100", "particles=20,50", "seeds=0..3"]),
        (ExperimentKind::EpdCompare, &["iterations=1000", "seeds=0..3"]),
    ];
    let mut compared = 0;
    for (kind, overrides) in small {
        let mut outputs = Vec::new();
        for threads in [1, 4, 4] {
            let dir = tempfile::tempdir().unwrap();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run(kind, overrides, dir.path()))?;
            outputs.push(snapshot(dir.path()));
        }
        if outputs[0].is_empty() || outputs.iter().any(|o| o != &outputs[0]) {
            return Err(format!("{kind}: outputs differ between runs"));
        }
        compared += outputs[0].len();
    }
    Ok(format!("{compared} CSV files byte-identical across serial, 4-thread and repeated 4-thread runs"))
}

fn schedule_formulas() -> Outcome {
    let prec = 256;
    let rm = RoundingMode::ToEven;
    let mut cc = Consts::new().unwrap();
    let exponent = BigFloat::from_u64(100, prec).div(&BigFloat::from_u64(99, prec), prec, rm);
    let h0 = 0.03;
    let b0 = 10;
    let mut details = Vec::new();
    for k in [0usize, 1, 10, 1_000, 100_000] {
        // Step size: the f64 result must be the correctly rounded quotient.
        let exact = BigFloat::from_f64(h0, prec).div(&BigFloat::from_u64(k as u64 + 1, prec), prec, rm);
        let got = step_size(k, &StepSchedule::Decreasing(h0));
        let diff = exact.sub(&BigFloat::from_f64(got, prec), prec, rm).abs();
        let half_ulp = BigFloat::from_f64(got * f64::EPSILON / 2.0, prec);
        if diff.cmp(&half_ulp).unwrap() > 0 {
            return Err(format!("step size at k = {k}: {got} is not the rounded value of h0/(k+1)"));
        }
        // Batch size: exact integer floor of (ln(k+1))^(100/99).
        let ln = BigFloat::from_u64(k as u64 + 1, prec).ln(prec, rm, &mut cc);
        let growth = if ln.is_zero() {
            BigFloat::from_u64(0, prec)
        } else {
            ln.pow(&exponent, prec, rm, &mut cc)
        };
        let got_b = batch_size(k, &BatchSchedule::Growing(b0), usize::MAX);
        let inc = (got_b - b0) as u64;
        let lo_ok = BigFloat::from_u64(inc, prec).cmp(&growth).unwrap() <= 0;
        let hi_ok = growth.cmp(&BigFloat::from_u64(inc + 1, prec)).unwrap() < 0;
        if !(lo_ok && hi_ok) {
            return Err(format!("batch size at k = {k}: B0 + {inc} is not B0 + floor((ln(k+1))^(100/99))"));
        }
        details.push(format!("k={k}: B={got_b}"));
    }
    Ok(format!("step sizes correctly rounded; batch sizes exact ({})", details.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 11] = [
        (1, "reduction-chain identities", Duration::from_secs(1), reduction_chain),
        (2, "gradient oracles", Duration::from_secs(1), gradient_oracles),
        (3, "unbiased minibatching", Duration::from_secs(1), unbiased_minibatching),
        (4, "gaussian sampling accuracy", Duration::from_secs(30), gaussian_accuracy),
        (5, "optimal-M shape", Duration::from_secs(300), optimal_m_shape),
        (6, "error-vs-M monotonicity", Duration::from_secs(600), error_vs_m),
        (7, "multi-mode escape", Duration::from_secs(60), multimode_escape),
        (8, "EPD collapse vs floor", Duration::from_secs(120), epd_collapse_vs_floor),
        (9, "conjugate posterior", Duration::from_secs(60), conjugate_posterior),
        (10, "determinism", Duration::from_secs(60), determinism),
        (11, "schedule formulas", Duration::from_secs(1), schedule_formulas),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, budget, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (status, mut detail) = match outcome {
            Ok(d) if elapsed <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; runtime over budget")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failures += 1;
        }
        detail.push_str(&format!(" [{:.2}s / {}s]", elapsed.as_secs_f64(), budget.as_secs()));
        println!("criterion {id:>2} {status} {name}: {detail}");
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
