//! Experiment configuration files.
//!
//! Configs are TOML documents. Parsing goes through [`RawConfig`], where
//! every field is optional, and is then validated into a typed
//! [`ExperimentConfig`] with all defaults filled. Serializing a config writes
//! the filled form back out, so `parse(serialize(cfg)) == cfg`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::KernelSpec;
use crate::meta::{Family, LabelFn, MetaDistribution, ParamBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("unknown experiment `{0}`; expected one of: {names}", names = ExperimentKind::NAMES.join(", "))]
    UnknownExperiment(String),

    #[error("missing required field `{0}`")]
    MissingField(&'static str),

    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Theorem1Scaling,
    SmallBall,
    Lemma1,
    AdaptiveRegression,
    KernelKernelBaseline,
    Calibrate,
}

impl ExperimentKind {
    pub const NAMES: [&'static str; 6] = [
        "theorem1_scaling",
        "small_ball",
        "lemma1",
        "adaptive_regression",
        "kernel_kernel_baseline",
        "calibrate",
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    /// Tag mixed into the master seed so experiments sharing a seed use
    /// unrelated streams.
    pub(crate) fn seed_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ExperimentKind::*;
        Ok(match s {
            "theorem1_scaling" => Theorem1Scaling,
            "small_ball" => SmallBall,
            "lemma1" => Lemma1,
            "adaptive_regression" => AdaptiveRegression,
            "kernel_kernel_baseline" => KernelKernelBaseline,
            "calibrate" => Calibrate,
            other => return Err(ConfigError::UnknownExperiment(other.to_string())),
        })
    }
}

/// Meta-distribution description with defaults filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub family: Family,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub base_width: f64,
    pub label: LabelFn,
    pub lipschitz: f64,
    pub distance_scale: f64,
}

impl MetaConfig {
    pub fn build(&self) -> crate::Result<MetaDistribution> {
        MetaDistribution::new(
            self.family,
            ParamBox::new(self.lo.clone(), self.hi.clone())?,
            self.base_width,
            self.label,
            self.lipschitz,
            self.distance_scale,
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// Density-estimation settings shared by the regression experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySettings {
    pub kernel: KernelSpec,
    pub grid_points: usize,
    /// Extra margin around the members' supports when sizing the grid.
    pub grid_pad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSettings {
    pub epsilon: f64,
    /// `None`: calibrate `n` against target error `epsilon / (9 L)`.
    pub n: Option<usize>,
    pub max_iter: usize,
    pub confidence: f64,
    pub calibration_trials: usize,
    pub density: DensitySettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSettings {
    pub h: f64,
    pub n: usize,
    pub train_size: usize,
    pub regression_kernel: KernelSpec,
    pub density: DensitySettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrateSettings {
    pub target_err: f64,
    pub confidence: f64,
    pub density: DensitySettings,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentParams {
    Theorem1Scaling { m_list: Vec<usize>, s: Vec<f64> },
    SmallBall { i_max: u32, s: Vec<f64> },
    Lemma1 { m_list: Vec<usize>, i_max: u32, s: Vec<f64> },
    AdaptiveRegression(AdaptiveSettings),
    KernelKernelBaseline(BaselineSettings),
    Calibrate(CalibrateSettings),
}

impl ExperimentParams {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentParams::Theorem1Scaling { .. } => ExperimentKind::Theorem1Scaling,
            ExperimentParams::SmallBall { .. } => ExperimentKind::SmallBall,
            ExperimentParams::Lemma1 { .. } => ExperimentKind::Lemma1,
            ExperimentParams::AdaptiveRegression(_) => ExperimentKind::AdaptiveRegression,
            ExperimentParams::KernelKernelBaseline(_) => ExperimentKind::KernelKernelBaseline,
            ExperimentParams::Calibrate(_) => ExperimentKind::Calibrate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,
    pub meta: MetaConfig,
    pub params: ExperimentParams,
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        self.params.kind()
    }

    /// Output path, `<experiment>.csv` when none was configured.
    pub fn out_path(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.csv", self.kind())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RawConfig::from(self)).expect("config serializes")
    }
}

/// On-disk shape of the `[meta]` table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    /// Dimension of the unit parameter box, when `lo`/`hi` are absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<LabelFn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_scale: Option<f64>,
}

/// On-disk shape of a config file. Every field is optional here; required
/// fields are enforced per experiment by [`parse_config`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression_kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_pad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<RawMeta>,
}

/// Defaults, also printed by `distreg --help`.
pub mod defaults {
    pub const TRIALS_THEOREM1: usize = 200;
    pub const TRIALS_SMALL_BALL: usize = 10_000;
    pub const TRIALS_LEMMA1: usize = 10_000;
    pub const TRIALS_ADAPTIVE: usize = 100;
    pub const TRIALS_BASELINE: usize = 100;
    pub const TRIALS_CALIBRATE: usize = 50;
    pub const I_MAX_SMALL_BALL: u32 = 10;
    pub const I_MAX_LEMMA1: u32 = 40;
    pub const CONFIDENCE: f64 = 0.95;
    pub const CALIBRATION_TRIALS: usize = 50;
    pub const GRID_POINTS: usize = 1024;
    pub const GRID_PAD: f64 = 0.5;
    pub const BASELINE_N: usize = 256;
    pub const BASELINE_TRAIN_SIZE: usize = 100;
}

fn positive(field: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn require<T>(v: Option<T>, field: &'static str) -> Result<T, ConfigError> {
    v.ok_or(ConfigError::MissingField(field))
}

fn meta_from_raw(raw: Option<&RawMeta>) -> Result<MetaConfig, ConfigError> {
    let raw = raw.ok_or(ConfigError::MissingField("meta"))?;
    let (lo, hi) = match (&raw.lo, &raw.hi, raw.d) {
        (Some(lo), Some(hi), d) => {
            if d.is_some_and(|d| d != lo.len()) {
                return Err(invalid("meta.d", "does not match the length of meta.lo"));
            }
            (lo.clone(), hi.clone())
        }
        (None, None, Some(d)) => (vec![0.0; d], vec![1.0; d]),
        (Some(_), None, _) => return Err(ConfigError::MissingField("meta.hi")),
        (None, Some(_), _) => return Err(ConfigError::MissingField("meta.lo")),
        (None, None, None) => return Err(ConfigError::MissingField("meta.d")),
    };
    let meta = MetaConfig {
        family: raw.family.unwrap_or(Family::UniformLocation),
        lo,
        hi,
        base_width: raw.base_width.unwrap_or(1.0),
        label: raw.label.unwrap_or(LabelFn::CoordinateSum),
        lipschitz: raw.lipschitz.unwrap_or(1.0),
        distance_scale: raw.distance_scale.unwrap_or(1.0),
    };
    meta.build().map_err(|e| invalid("meta", e.to_string()))?;
    Ok(meta)
}

fn density_from_raw(raw: &RawConfig) -> Result<DensitySettings, ConfigError> {
    let grid_points = raw.grid_points.unwrap_or(defaults::GRID_POINTS);
    if grid_points < 2 {
        return Err(invalid("grid_points", "need at least 2"));
    }
    Ok(DensitySettings {
        kernel: raw.kernel.unwrap_or(KernelSpec::Epanechnikov),
        grid_points,
        grid_pad: raw.grid_pad.map_or(Ok(defaults::GRID_PAD), |p| {
            if p >= 0.0 && p.is_finite() {
                Ok(p)
            } else {
                Err(invalid("grid_pad", format!("must be non-negative, got {p}")))
            }
        })?,
    })
}

fn confidence_from_raw(raw: &RawConfig) -> Result<f64, ConfigError> {
    let c = raw.confidence.unwrap_or(defaults::CONFIDENCE);
    if c > 0.0 && c < 1.0 {
        Ok(c)
    } else {
        Err(invalid("confidence", format!("must lie in (0, 1), got {c}")))
    }
}

fn point_from_raw(raw: &RawConfig, meta: &MetaConfig) -> Result<Vec<f64>, ConfigError> {
    let s = raw.s.clone().unwrap_or_else(|| {
        meta.lo.iter().zip(&meta.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    });
    if s.len() != meta.dim() {
        return Err(invalid("s", format!("expected {} coordinates", meta.dim())));
    }
    let inside = s
        .iter()
        .zip(meta.lo.iter().zip(&meta.hi))
        .all(|(x, (a, b))| a <= x && x <= b);
    if !inside {
        return Err(invalid("s", "must lie in the parameter box"));
    }
    Ok(s)
}

fn m_list_from_raw(raw: &RawConfig) -> Result<Vec<usize>, ConfigError> {
    let m_list = require(raw.m_list.clone(), "m_list")?;
    if m_list.is_empty() || m_list.contains(&0) {
        return Err(invalid("m_list", "needs at least one entry, all positive"));
    }
    Ok(m_list)
}

impl TryFrom<RawConfig> for ExperimentConfig {
    type Error = ConfigError;

    fn try_from(raw: RawConfig) -> Result<Self, ConfigError> {
        let kind: ExperimentKind = require(raw.experiment.as_deref(), "experiment")?.parse()?;
        let seed = require(raw.seed, "seed")?;
        let meta = meta_from_raw(raw.meta.as_ref())?;
        let default_trials = match kind {
            ExperimentKind::Theorem1Scaling => defaults::TRIALS_THEOREM1,
            ExperimentKind::SmallBall => defaults::TRIALS_SMALL_BALL,
            ExperimentKind::Lemma1 => defaults::TRIALS_LEMMA1,
            ExperimentKind::AdaptiveRegression => defaults::TRIALS_ADAPTIVE,
            ExperimentKind::KernelKernelBaseline => defaults::TRIALS_BASELINE,
            ExperimentKind::Calibrate => defaults::TRIALS_CALIBRATE,
        };
        let trials = raw.trials.unwrap_or(default_trials);
        if trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }

        let params = match kind {
            ExperimentKind::Theorem1Scaling => {
                let m_list = m_list_from_raw(&raw)?;
                if m_list.len() < 2 {
                    return Err(invalid("m_list", "slope fit needs at least two values of m"));
                }
                ExperimentParams::Theorem1Scaling {
                    m_list,
                    s: point_from_raw(&raw, &meta)?,
                }
            }
            ExperimentKind::SmallBall => {
                let i_max = raw.i_max.unwrap_or(defaults::I_MAX_SMALL_BALL);
                if i_max == 0 {
                    return Err(invalid("i_max", "must be at least 1"));
                }
                ExperimentParams::SmallBall {
                    i_max,
                    s: point_from_raw(&raw, &meta)?,
                }
            }
            ExperimentKind::Lemma1 => {
                let i_max = raw.i_max.unwrap_or(defaults::I_MAX_LEMMA1);
                if i_max < 20 {
                    return Err(invalid("i_max", "dyadic tail 2^-i_max must be below 1e-6"));
                }
                ExperimentParams::Lemma1 {
                    m_list: m_list_from_raw(&raw)?,
                    i_max,
                    s: point_from_raw(&raw, &meta)?,
                }
            }
            ExperimentKind::AdaptiveRegression => {
                let epsilon = positive("epsilon", require(raw.epsilon, "epsilon")?)?;
                if raw.n.is_some_and(|n| n < 2) {
                    return Err(invalid("n", "need at least 2 points per distribution"));
                }
                let max_iter = raw.max_iter.unwrap_or_else(|| {
                    crate::regression::default_max_iter(epsilon, meta.lipschitz, meta.dim())
                });
                if max_iter == 0 {
                    return Err(invalid("max_iter", "must be at least 1"));
                }
                let calibration_trials =
                    raw.calibration_trials.unwrap_or(defaults::CALIBRATION_TRIALS);
                if calibration_trials < 50 {
                    return Err(invalid("calibration_trials", "must be at least 50"));
                }
                ExperimentParams::AdaptiveRegression(AdaptiveSettings {
                    epsilon,
                    n: raw.n,
                    max_iter,
                    confidence: confidence_from_raw(&raw)?,
                    calibration_trials,
                    density: density_from_raw(&raw)?,
                })
            }
            ExperimentKind::KernelKernelBaseline => {
                let n = raw.n.unwrap_or(defaults::BASELINE_N);
                if n < 2 {
                    return Err(invalid("n", "need at least 2 points per distribution"));
                }
                let train_size = raw.train_size.unwrap_or(defaults::BASELINE_TRAIN_SIZE);
                if train_size == 0 {
                    return Err(invalid("train_size", "must be at least 1"));
                }
                ExperimentParams::KernelKernelBaseline(BaselineSettings {
                    h: positive("h", require(raw.h, "h")?)?,
                    n,
                    train_size,
                    regression_kernel: raw.regression_kernel.unwrap_or(KernelSpec::Gaussian),
                    density: density_from_raw(&raw)?,
                })
            }
            ExperimentKind::Calibrate => {
                if trials < 50 {
                    return Err(invalid("trials", "calibration needs at least 50 trials"));
                }
                let target_err = positive("target_err", require(raw.target_err, "target_err")?)?;
                if target_err > 2.0 {
                    return Err(invalid("target_err", "must not exceed 2"));
                }
                ExperimentParams::Calibrate(CalibrateSettings {
                    target_err,
                    confidence: confidence_from_raw(&raw)?,
                    density: density_from_raw(&raw)?,
                })
            }
        };

        Ok(ExperimentConfig {
            seed,
            trials,
            out: raw.out,
            meta,
            params,
        })
    }
}

impl From<&ExperimentConfig> for RawConfig {
    fn from(cfg: &ExperimentConfig) -> Self {
        let m = &cfg.meta;
        let mut raw = RawConfig {
            experiment: Some(cfg.kind().name().to_string()),
            seed: Some(cfg.seed),
            trials: Some(cfg.trials),
            out: cfg.out.clone(),
            meta: Some(RawMeta {
                family: Some(m.family),
                d: Some(m.dim()),
                lo: Some(m.lo.clone()),
                hi: Some(m.hi.clone()),
                base_width: Some(m.base_width),
                label: Some(m.label),
                lipschitz: Some(m.lipschitz),
                distance_scale: Some(m.distance_scale),
            }),
            ..RawConfig::default()
        };
        let put_density = |raw: &mut RawConfig, d: &DensitySettings| {
            raw.kernel = Some(d.kernel);
            raw.grid_points = Some(d.grid_points);
            raw.grid_pad = Some(d.grid_pad);
        };
        match &cfg.params {
            ExperimentParams::Theorem1Scaling { m_list, s } => {
                raw.m_list = Some(m_list.clone());
                raw.s = Some(s.clone());
            }
            ExperimentParams::SmallBall { i_max, s } => {
                raw.i_max = Some(*i_max);
                raw.s = Some(s.clone());
            }
            ExperimentParams::Lemma1 { m_list, i_max, s } => {
                raw.m_list = Some(m_list.clone());
                raw.i_max = Some(*i_max);
                raw.s = Some(s.clone());
            }
            ExperimentParams::AdaptiveRegression(a) => {
                raw.epsilon = Some(a.epsilon);
                raw.n = a.n;
                raw.max_iter = Some(a.max_iter);
                raw.confidence = Some(a.confidence);
                raw.calibration_trials = Some(a.calibration_trials);
                put_density(&mut raw, &a.density);
            }
            ExperimentParams::KernelKernelBaseline(b) => {
                raw.h = Some(b.h);
                raw.n = Some(b.n);
                raw.train_size = Some(b.train_size);
                raw.regression_kernel = Some(b.regression_kernel);
                put_density(&mut raw, &b.density);
            }
            ExperimentParams::Calibrate(c) => {
                raw.target_err = Some(c.target_err);
                raw.confidence = Some(c.confidence);
                put_density(&mut raw, &c.density);
            }
        }
        raw
    }
}

/// Parse and validate a TOML config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    ExperimentConfig::try_from(raw)
}
