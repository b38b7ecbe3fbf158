//! Reproducible experiment runner.
//!
//! One config describes one experiment. [`execute`] runs it and returns a
//! [`RunReport`]; [`run_experiment`] also writes the CSV. Trials are seeded
//! from `seed / experiment / trial` and collected in trial order, so the CSV
//! does not depend on the worker count.

mod config;
mod format;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

pub use config::{
    defaults, parse_config, AdaptiveSettings, BaselineSettings, CalibrateSettings, ConfigError,
    DensitySettings, ExperimentConfig, ExperimentKind, ExperimentParams, MetaConfig, RawConfig,
    RawMeta,
};
pub use format::g6;

use crate::distance::GridSpec;
use crate::kernels::DensityEstimate;
use crate::meta::MetaDistribution;
use crate::regression::{
    adaptive_closest_point, calibrate_sample_size, kernel_kernel_estimate, AdaptiveParams,
    CalibrationParams, LabeledEstimate,
};
use crate::seed::SeedStream;
use crate::theory;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Domain(#[from] crate::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker cap; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl RunOptions {
    /// Reads the worker cap from `DISTREG_THREADS`.
    pub fn from_env() -> Self {
        let threads = std::env::var("DISTREG_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0);
        RunOptions { threads }
    }
}

/// A named pass/fail assertion over the run's results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
    pub wall_time_s: f64,
    pub version: &'static str,
}

impl RunReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_csv_string(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error()).map_err(|e| {
            ExperimentError::Io {
                path: PathBuf::from("<memory>"),
                source: e,
            }
        })?;
        Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
    }

    /// One-line JSON summary.
    pub fn summary_line(&self) -> String {
        let value = json!({
            "experiment": self.config.kind().name(),
            "seed": self.config.seed,
            "trials": self.config.trials,
            "rows": self.rows.len(),
            "summary": self.summary,
            "checks": self.checks,
            "passed": self.all_checks_pass(),
            "wall_time_s": self.wall_time_s,
            "version": self.version,
        });
        value.to_string()
    }
}

/// Run the configured experiment without touching the filesystem.
pub fn execute(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build()?;
    let start = Instant::now();
    let mut report = pool.install(|| dispatch(config))?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Run the experiment and write its CSV to the configured output path.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, ExperimentError> {
    let report = execute(config, opts)?;
    write_csv(&report, &config.out_path())?;
    Ok(report)
}

pub fn write_csv(report: &RunReport, path: &Path) -> Result<(), ExperimentError> {
    let text = report.to_csv_string()?;
    std::fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Output {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    summary: Map<String, Value>,
    checks: Vec<Check>,
}

fn dispatch(config: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    let meta = config.meta.build()?;
    let seed = SeedStream::new(config.seed).derive(config.kind().seed_tag());
    let trials = config.trials;
    let out = match &config.params {
        ExperimentParams::Theorem1Scaling { m_list, s } => theorem1(&meta, s, m_list, trials, seed)?,
        ExperimentParams::SmallBall { i_max, s } => small_ball(&meta, s, *i_max, trials, seed)?,
        ExperimentParams::Lemma1 { m_list, i_max, s } => {
            lemma1(&meta, s, m_list, *i_max, trials, seed)?
        }
        ExperimentParams::AdaptiveRegression(a) => adaptive(&meta, a, trials, seed)?,
        ExperimentParams::KernelKernelBaseline(b) => baseline(&meta, b, trials, seed)?,
        ExperimentParams::Calibrate(c) => calibrate(&meta, c, trials, seed)?,
    };
    Ok(RunReport {
        config: config.clone(),
        header: out.header,
        rows: out.rows,
        summary: out.summary,
        checks: out.checks,
        wall_time_s: 0.0,
        version: env!("CARGO_PKG_VERSION"),
    })
}

fn summary_of(pairs: Vec<(&str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn theorem1(
    meta: &MetaDistribution,
    s: &[f64],
    m_list: &[usize],
    trials: usize,
    seed: SeedStream,
) -> crate::Result<Output> {
    let handle = meta.handle(s.to_vec())?;
    let r = theory::scaling_report(meta, &handle, m_list, trials, seed)?;
    let d = r.d;
    let mut rows: Vec<Vec<String>> = (0..r.m_values.len())
        .map(|k| {
            vec![
                g6(d),
                r.m_values[k].to_string(),
                g6(r.means[k]),
                g6(r.stderrs[k]),
                g6(r.bounds[k]),
                trials.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        g6(d),
        "slope".into(),
        g6(r.slope),
        String::new(),
        g6(-1.0 / d),
        trials.to_string(),
    ]);
    let slope_ok = (r.slope + 1.0 / d).abs() <= 0.15;
    Ok(Output {
        header: vec!["d", "m", "mean", "stderr", "bound", "trials"],
        rows,
        summary: summary_of(vec![("slope", json!(r.slope)), ("expected_slope", json!(-1.0 / d))]),
        checks: vec![
            Check::new(
                "slope",
                slope_ok,
                format!("slope {} vs {} +- 0.15", g6(r.slope), g6(-1.0 / d)),
            ),
            Check::new("envelope", r.within_envelope(), "every mean <= bound"),
        ],
    })
}

fn small_ball(
    meta: &MetaDistribution,
    s: &[f64],
    i_max: u32,
    trials: usize,
    seed: SeedStream,
) -> crate::Result<Output> {
    let handle = meta.handle(s.to_vec())?;
    let r = theory::check_small_ball_bound(meta, &handle, i_max, trials, seed)?;
    let rows = (0..r.radii.len())
        .map(|i| {
            vec![
                r.d.to_string(),
                i.to_string(),
                g6(r.radii[i]),
                g6(r.empirical_mass[i]),
                g6(r.bound[i]),
                r.holds[i].to_string(),
            ]
        })
        .collect();
    Ok(Output {
        header: vec!["d", "i", "radius", "empirical_mass", "bound", "holds"],
        rows,
        summary: summary_of(vec![
            ("all_hold", json!(r.all_hold())),
            ("exact_all_agree", json!(r.exact_all_agree())),
        ]),
        checks: vec![
            Check::new("bound", r.all_hold(), "empirical >= 2^(-id) - 3 sigma"),
            Check::new("exact_mass", r.exact_all_agree(), "empirical within 3 sigma of exact"),
        ],
    })
}

fn lemma1(
    meta: &MetaDistribution,
    s: &[f64],
    m_list: &[usize],
    i_max: u32,
    trials: usize,
    seed: SeedStream,
) -> crate::Result<Output> {
    let handle = meta.handle(s.to_vec())?;
    let d = meta.doubling_dimension();
    let mut rows = Vec::with_capacity(m_list.len());
    let mut all = true;
    for (k, &m) in m_list.iter().enumerate() {
        let c = theory::lemma1_sums(meta, &handle, m, i_max, trials, seed.derive(k as u64))?;
        all &= c.holds;
        rows.push(vec![
            d.to_string(),
            m.to_string(),
            g6(c.lhs),
            g6(c.rhs),
            g6(c.stderr),
            c.holds.to_string(),
        ]);
    }
    Ok(Output {
        header: vec!["d", "m", "lhs", "rhs", "stderr", "holds"],
        rows,
        summary: summary_of(vec![("all_hold", json!(all))]),
        checks: vec![Check::new("lemma1", all, "lhs <= rhs + 3 sigma for every m")],
    })
}

fn density_grid(meta: &MetaDistribution, d: &DensitySettings) -> crate::Result<GridSpec> {
    meta.covering_grid(d.grid_pad, d.grid_points)
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2]) as f64
    }
}

fn adaptive(
    meta: &MetaDistribution,
    a: &AdaptiveSettings,
    trials: usize,
    seed: SeedStream,
) -> crate::Result<Output> {
    let grid = density_grid(meta, &a.density)?;
    let lipschitz = meta.lipschitz_const();
    let calibration = match a.n {
        Some(_) => None,
        None => {
            let mut params = CalibrationParams::new(
                a.epsilon / (9.0 * lipschitz),
                a.confidence,
                a.density.kernel,
            );
            params.trials = a.calibration_trials;
            Some(calibrate_sample_size(meta, &params, &grid, seed.derive(u64::MAX))?)
        }
    };
    let n = a.n.or(calibration.as_ref().map(|c| c.n)).expect("n or calibration");
    let params = AdaptiveParams {
        epsilon: a.epsilon,
        lipschitz,
        n,
        max_iter: a.max_iter,
        kernel: a.density.kernel,
    };
    let threshold = params.threshold();

    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            let target = meta.draw_distribution(&mut rng);
            let points = meta.draw_samples(&target, n, &mut rng)?;
            let res = adaptive_closest_point(meta, &points, &params, &grid, &mut rng)?;
            Ok((meta.oracle_label(&target), res))
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(trials);
    let mut converged = 0usize;
    let mut successes = 0usize;
    let mut invariant = true;
    let mut iterations = Vec::with_capacity(trials);
    for (t, (truth, r)) in results.iter().enumerate() {
        let err = (r.label - truth).abs();
        iterations.push(r.iterations);
        if r.converged {
            converged += 1;
            successes += usize::from(err <= a.epsilon);
            invariant &= r.accepted_distance <= threshold;
        }
        rows.push(vec![
            t.to_string(),
            g6(r.label),
            g6(*truth),
            g6(err),
            r.iterations.to_string(),
            r.samples_drawn.to_string(),
            r.converged.to_string(),
        ]);
    }
    let success_rate = if converged == 0 {
        0.0
    } else {
        successes as f64 / converged as f64
    };
    let mut summary = summary_of(vec![
        ("success_rate", json!(success_rate)),
        ("converged_fraction", json!(converged as f64 / trials as f64)),
        ("median_iterations", json!(median(&mut iterations))),
        ("n", json!(n)),
        ("threshold", json!(threshold)),
        ("max_iter", json!(a.max_iter)),
    ]);
    if let Some(c) = &calibration {
        summary.insert("calibration_achieved".into(), json!(c.achieved));
    }
    Ok(Output {
        header: vec![
            "trial",
            "label",
            "truth",
            "abs_err",
            "iterations",
            "samples_drawn",
            "converged",
        ],
        rows,
        summary,
        checks: vec![
            Check::new(
                "success_rate",
                converged > 0 && success_rate >= 0.9,
                format!("{converged} converged, success rate {}", g6(success_rate)),
            ),
            Check::new(
                "acceptance_threshold",
                invariant,
                format!("accepted distance <= {}", g6(threshold)),
            ),
        ],
    })
}

fn baseline(
    meta: &MetaDistribution,
    b: &BaselineSettings,
    trials: usize,
    seed: SeedStream,
) -> crate::Result<Output> {
    let grid = density_grid(meta, &b.density)?;
    let kernel = b.density.kernel;
    let train_seed = seed.derive(u64::MAX);
    let dataset = (0..b.train_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = train_seed.derive(i as u64).rng();
            let handle = meta.draw_distribution(&mut rng);
            let points = meta.draw_samples(&handle, b.n, &mut rng)?;
            Ok(LabeledEstimate {
                estimate: DensityEstimate::with_default_bandwidth(points, kernel)?,
                label: meta.oracle_label(&handle),
                handle: Some(handle),
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let (lo, hi) = dataset.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
        (lo.min(e.label), hi.max(e.label))
    });

    let mut rows = Vec::with_capacity(trials);
    let mut errors = Vec::with_capacity(trials);
    let mut bounded = true;
    for t in 0..trials {
        let mut rng = seed.derive(t as u64).rng();
        let target = meta.draw_distribution(&mut rng);
        let points = meta.draw_samples(&target, b.n, &mut rng)?;
        let query = DensityEstimate::with_default_bandwidth(points, kernel)?;
        let estimate = kernel_kernel_estimate(&dataset, &query, b.h, b.regression_kernel, &grid)?;
        let truth = meta.oracle_label(&target);
        let err = (estimate - truth).abs();
        bounded &= estimate == 0.0 || (lo <= estimate && estimate <= hi);
        errors.push(err);
        rows.push(vec![
            t.to_string(),
            g6(estimate),
            g6(truth),
            g6(err),
            b.train_size.to_string(),
        ]);
    }
    let (mean_err, stderr) = crate::regression::mean_and_stderr(&errors);
    Ok(Output {
        header: vec!["trial", "estimate", "truth", "abs_err", "train_size"],
        rows,
        summary: summary_of(vec![
            ("mean_abs_err", json!(mean_err)),
            ("stderr", json!(stderr)),
        ]),
        checks: vec![Check::new(
            "bounded",
            bounded,
            "every estimate lies in the training label range or is 0",
        )],
    })
}

fn calibrate(
    meta: &MetaDistribution,
    c: &CalibrateSettings,
    trials: usize,
    seed: SeedStream,
) -> crate::Result<Output> {
    let grid = density_grid(meta, &c.density)?;
    let mut params = CalibrationParams::new(c.target_err, c.confidence, c.density.kernel);
    params.trials = trials;
    let cal = calibrate_sample_size(meta, &params, &grid, seed)?;
    let rows = cal
        .steps
        .iter()
        .map(|s| {
            vec![
                s.n.to_string(),
                g6(s.mean),
                g6(s.stderr),
                g6(s.upper),
                s.accepted.to_string(),
            ]
        })
        .collect();
    Ok(Output {
        header: vec!["n", "mean", "stderr", "upper", "accepted"],
        rows,
        summary: summary_of(vec![("n", json!(cal.n)), ("achieved", json!(cal.achieved))]),
        checks: vec![Check::new(
            "achieved",
            cal.achieved,
            format!("n = {} for target {}", cal.n, g6(c.target_err)),
        )],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> RunReport {
        execute(&parse_config(text).unwrap(), &RunOptions::default()).unwrap()
    }

    #[test]
    fn lemma1_rhs_column_for_m1() {
        let r = run("experiment = \"lemma1\"\nseed = 1\ntrials = 200\nm_list = [1]\n[meta]\nd = 1\n");
        assert_eq!(r.header, ["d", "m", "lhs", "rhs", "stderr", "holds"]);
        let rhs: f64 = r.rows[0][3].parse().unwrap();
        assert!((rhs - 2.0 / 3.0).abs() <= 1e-5, "{rhs}");
    }

    #[test]
    fn theorem1_rows_and_slope_row() {
        let r = run(
            "experiment = \"theorem1_scaling\"\nseed = 42\ntrials = 100\n\
             m_list = [16, 64, 256]\n[meta]\nd = 1\n",
        );
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rows[3][1], "slope");
        let csv = r.to_csv_string().unwrap();
        assert!(csv.starts_with("d,m,mean,stderr,bound,trials\n"));
    }

    #[test]
    fn small_ball_row_per_radius() {
        let r = run("experiment = \"small_ball\"\nseed = 3\ntrials = 500\ni_max = 4\n[meta]\nd = 2\n");
        assert_eq!(r.rows.len(), 5);
        assert!(r.all_checks_pass(), "{}", r.summary_line());
    }

    #[test]
    fn baseline_is_bounded() {
        let r = run(
            "experiment = \"kernel_kernel_baseline\"\nseed = 5\ntrials = 5\nh = 0.5\n\
             train_size = 20\nn = 64\ngrid_points = 256\n[meta]\nd = 1\ndistance_scale = 0.5\n",
        );
        assert_eq!(r.rows.len(), 5);
        assert!(r.all_checks_pass());
    }

    #[test]
    fn summary_line_is_json() {
        let r = run("experiment = \"small_ball\"\nseed = 3\ntrials = 50\ni_max = 2\n[meta]\nd = 1\n");
        let v: Value = serde_json::from_str(&r.summary_line()).unwrap();
        assert_eq!(v["experiment"], "small_ball");
        assert_eq!(v["rows"], 3);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3, 1, 2]), 2.0);
        assert_eq!(median(&mut [4, 1, 2, 3]), 2.5);
    }
}
