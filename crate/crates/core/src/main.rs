use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use sposkit::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use sposkit::{Error, Result};

/// Run a synthetic particle-sampling experiment and write its CSV output.
#[derive(Debug, Parser)]
#[command(name = "sposkit", version)]
struct Cli {
    /// Config file (`key = value` lines). Defaults to the shipped config of `--experiment`.
    #[arg(long)]
    config: Option<PathBuf>,

    /// gaussian-sweep, m-sweep, multimode, posterior-gaussian or epd-compare.
    #[arg(long)]
    experiment: Option<ExperimentKind>,

    /// Output directory; falls back to the config's `out_dir`, then `$SPOSKIT_OUT/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Added to every seed in the config.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,

    /// `key=value` applied after the config is loaded; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Print the resolved config and exit without running.
    #[arg(long)]
    dry_run: bool,
}

fn resolve(cli: &Cli) -> Result<(ExperimentConfig, PathBuf)> {
    let mut config = match (&cli.config, cli.experiment) {
        (Some(path), kind) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let mut config = ExperimentConfig::parse(&text)?;
            if let Some(kind) = kind {
                config.experiment = kind;
            }
            config
        }
        (None, Some(kind)) => ExperimentConfig::shipped(kind),
        (None, None) => return Err(Error::Config("pass --config or --experiment".into())),
    };
    for assignment in &cli.overrides {
        config.apply_override(assignment)?;
    }
    config.apply_seed_offset(cli.seed_offset);
    config.validate()?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .or_else(|| std::env::var_os("SPOSKIT_OUT").map(|d| PathBuf::from(d).join(config.experiment.as_str())))
        .ok_or_else(|| Error::Config("no output directory: pass --out, set out_dir, or set SPOSKIT_OUT".into()))?;
    config.out_dir = Some(out_dir.clone());
    Ok((config, out_dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, out_dir) = match resolve(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("sposkit: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.dry_run {
        print!("{}", config.to_config_string());
        return ExitCode::SUCCESS;
    }
    match run_experiment(&config, &out_dir) {
        Ok(output) => {
            for file in &output.files {
                println!("{}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sposkit: {e}");
            ExitCode::FAILURE
        }
    }
}
