use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use distreg::experiment::{parse_config, run_experiment, ExperimentKind, RunOptions};

const AFTER_HELP: &str = concat!(
    "Experiments: theorem1_scaling, small_ball, lemma1, adaptive_regression, ",
    "kernel_kernel_baseline, calibrate.\n\n",
    "Config defaults (TOML):\n",
    "  out                 <experiment>.csv\n",
    "  trials              theorem1_scaling 200, small_ball 10000, lemma1 10000,\n",
    "                      adaptive_regression 100, kernel_kernel_baseline 100, calibrate 50\n",
    "  [meta] family       uniform_location (or gaussian_location)\n",
    "  [meta] d            unit box [0,1]^d when lo/hi are absent\n",
    "  [meta] base_width   1.0\n",
    "  [meta] label        coordinate_sum (or euclidean_norm)\n",
    "  [meta] lipschitz    1.0\n",
    "  [meta] distance_scale 1.0\n",
    "  s                   centre of the parameter box\n",
    "  i_max               small_ball 10, lemma1 40\n",
    "  kernel              epanechnikov\n",
    "  regression_kernel   gaussian\n",
    "  grid_points         1024 per axis\n",
    "  grid_pad            0.5\n",
    "  n                   adaptive_regression: calibrated to epsilon/(9L); baseline 256\n",
    "  max_iter            ceil(10 (6L/epsilon)^d)\n",
    "  confidence          0.95\n",
    "  calibration_trials  50\n",
    "  train_size          100\n\n",
    "Environment: DISTREG_THREADS caps the worker count; RUST_LOG sets log level.\n",
    "Exit status: 0 success, 1 failed check under --assert, 2 error."
);

/// Run one distribution-regression experiment and write its CSV.
#[derive(Debug, Parser)]
#[command(name = "distreg", version, after_help = AFTER_HELP)]
struct Cli {
    /// Experiment name; must match `experiment` in the config when present there.
    experiment: String,

    /// TOML config file.
    #[arg(long)]
    config: PathBuf,

    /// Override the master seed (0 to 2^63 - 1, the TOML integer range).
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,

    /// Override the CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,

    /// Exit with status 1 when any acceptance check fails.
    #[arg(long)]
    assert: bool,
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    let kind: ExperimentKind = cli.experiment.parse()?;
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| format!("cannot read {}: {e}", cli.config.display()))?;
    let mut raw: toml::Table = toml::from_str(&text)
        .map_err(|e| distreg::experiment::ConfigError::Parse(e.to_string()))?;
    match raw.get("experiment").and_then(|v| v.as_str()) {
        Some(name) if name != kind.name() => {
            return Err(format!("config is for `{name}`, not `{kind}`").into());
        }
        _ => {
            raw.insert("experiment".into(), kind.name().into());
        }
    }
    if let Some(seed) = cli.seed {
        raw.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    if let Some(trials) = cli.trials {
        raw.insert("trials".into(), toml::Value::Integer(trials as i64));
    }
    if let Some(out) = &cli.out {
        raw.insert("out".into(), out.display().to_string().into());
    }
    let config = parse_config(&toml::to_string(&raw)?)?;
    let report = run_experiment(&config, &RunOptions::from_env())?;
    println!("{}", report.summary_line());
    Ok(report.all_checks_pass())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let assert = cli.assert;
    match run(cli) {
        Ok(passed) if assert && !passed => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
