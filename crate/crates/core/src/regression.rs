//! Distribution regression estimators.
//!
//! Two estimators live here:
//!
//! * [`kernel_kernel_estimate`], the two-stage baseline: density estimates
//!   for every training distribution, then a kernel-weighted average of their
//!   labels over L1 distances to the query estimate.
//! * [`adaptive_closest_point`], which keeps drawing fresh distributions from
//!   the meta-distribution until one lands within `epsilon / (3 L)` of the
//!   target estimate, and returns that distribution's label.
//!
//! The per-distribution sample size for the adaptive loop comes from
//! [`calibrate_sample_size`], which searches for the smallest `n` whose
//! estimates sit within a requested L1 error of a high-fidelity reference.

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distance::{l1_distance, GridSpec};
use crate::error::{Error, Result};
use crate::kernels::{DensityEstimate, KernelSpec};
use crate::meta::{DistributionHandle, MetaDistribution};
use crate::samples::Samples;
use crate::seed::SeedStream;

/// A training pair `(P̂_i, Y_i)`.
#[derive(Debug, Clone)]
pub struct LabeledEstimate {
    pub estimate: DensityEstimate,
    pub label: f64,
    /// Only for auditing in tests and experiments.
    pub handle: Option<DistributionHandle>,
}

/// Kernel-weighted average of training labels.
///
/// Returns `Σ Y_i K(D_i/h) / Σ K(D_i/h)` with `D_i` the L1 distance between
/// `P̂_i` and `query` on `grid`, or exactly `0.0` when every weight vanishes.
pub fn kernel_kernel_estimate(
    dataset: &[LabeledEstimate],
    query: &DensityEstimate,
    h: f64,
    kernel: KernelSpec,
    grid: &GridSpec,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    for item in dataset {
        if item.estimate.dim() != query.dim() {
            return Err(Error::DimensionMismatch {
                expected: query.dim(),
                found: item.estimate.dim(),
            });
        }
    }
    let query_values = grid.sample(query)?;
    let distances = dataset
        .par_iter()
        .map(|item| {
            let v = grid.sample(&item.estimate)?;
            Ok(grid.integrate_abs_diff(&v, &query_values))
        })
        .collect::<Result<Vec<f64>>>()?;
    let labels: Vec<f64> = dataset.iter().map(|item| item.label).collect();
    Ok(weighted_label_average(&distances, &labels, h, kernel))
}

/// Second stage of the Kernel-Kernel estimator on precomputed distances.
pub fn weighted_label_average(distances: &[f64], labels: &[f64], h: f64, kernel: KernelSpec) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (d, y) in distances.iter().zip(labels) {
        let w = kernel.value(d / h);
        num += w * y;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Settings for [`adaptive_closest_point`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveParams {
    pub epsilon: f64,
    pub lipschitz: f64,
    /// Points drawn from each candidate distribution.
    pub n: usize,
    pub max_iter: usize,
    pub kernel: KernelSpec,
}

impl AdaptiveParams {
    /// Parameters with `max_iter = ceil(10 (6L/epsilon)^d)`.
    pub fn new(epsilon: f64, lipschitz: f64, n: usize, d: usize, kernel: KernelSpec) -> Self {
        AdaptiveParams {
            epsilon,
            lipschitz,
            n,
            max_iter: default_max_iter(epsilon, lipschitz, d),
            kernel,
        }
    }

    /// Acceptance radius `epsilon / (3 L)`.
    pub fn threshold(&self) -> f64 {
        self.epsilon / (3.0 * self.lipschitz)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(self.lipschitz > 0.0) || !self.lipschitz.is_finite() {
            return Err(Error::invalid(
                "lipschitz",
                format!("must be positive, got {}", self.lipschitz),
            ));
        }
        if self.n < 2 {
            return Err(Error::invalid("n", "need at least 2 points per distribution"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Draw budget suggested by the `m ~ delta^(-d)` nearest-neighbour scaling
/// with `delta = epsilon / (6 L)`, times ten.
pub fn default_max_iter(epsilon: f64, lipschitz: f64, d: usize) -> usize {
    let m = 10.0 * (6.0 * lipschitz / epsilon).powi(d as i32);
    m.ceil().clamp(1.0, usize::MAX as f64) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveResult {
    pub label: f64,
    pub iterations: usize,
    /// Distance of the returned distribution's estimate to the target estimate.
    pub accepted_distance: f64,
    pub converged: bool,
    pub samples_drawn: usize,
    /// The distribution whose label was returned.
    pub closest: DistributionHandle,
}

/// Closest-point search for the label of the distribution behind
/// `target_samples`.
///
/// The target estimate is built once with the default bandwidth rule. Each
/// iteration draws `P_i`, samples `n` points, estimates, and compares; the
/// first estimate within `epsilon / (3 L)` wins and its label is requested
/// from the oracle. After `max_iter` rejections the label of the closest
/// estimate seen is returned with `converged = false`.
pub fn adaptive_closest_point<R: Rng + ?Sized>(
    meta: &MetaDistribution,
    target_samples: &Samples,
    params: &AdaptiveParams,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<AdaptiveResult> {
    params.validate()?;
    if target_samples.dim() != meta.doubling_dimension() {
        return Err(Error::DimensionMismatch {
            expected: meta.doubling_dimension(),
            found: target_samples.dim(),
        });
    }
    let target = DensityEstimate::with_default_bandwidth(target_samples.clone(), params.kernel)?;
    let target_values = grid.sample(&target)?;
    let threshold = params.threshold();

    let mut best: Option<(f64, DistributionHandle)> = None;
    for i in 1..=params.max_iter {
        let handle = meta.draw_distribution(rng);
        let points = meta.draw_samples(&handle, params.n, rng)?;
        let estimate = DensityEstimate::with_default_bandwidth(points, params.kernel)?;
        let values = grid.sample(&estimate)?;
        let d = grid.integrate_abs_diff(&values, &target_values);
        if d <= threshold {
            return Ok(AdaptiveResult {
                label: meta.oracle_label(&handle),
                iterations: i,
                accepted_distance: d,
                converged: true,
                samples_drawn: params.n * i,
                closest: handle,
            });
        }
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, handle));
        }
    }
    let (d, handle) = best.expect("max_iter >= 1");
    Ok(AdaptiveResult {
        label: meta.oracle_label(&handle),
        iterations: params.max_iter,
        accepted_distance: d,
        converged: false,
        samples_drawn: params.n * params.max_iter,
        closest: handle,
    })
}

pub const CALIBRATION_MIN_EXP: u32 = 4;
pub const CALIBRATION_MAX_EXP: u32 = 16;
/// Reference estimates use this many times more points than the candidate.
pub const REFERENCE_FACTOR: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationParams {
    pub target_err: f64,
    /// One-sided confidence that the mean error is below `target_err`.
    pub confidence: f64,
    pub trials: usize,
    pub kernel: KernelSpec,
}

impl CalibrationParams {
    pub fn new(target_err: f64, confidence: f64, kernel: KernelSpec) -> Self {
        CalibrationParams {
            target_err,
            confidence,
            trials: 50,
            kernel,
        }
    }
}

/// Outcome for one candidate sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationStep {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `mean + z * stderr`
    pub upper: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub n: usize,
    /// `false` when no candidate met the target and `n` is the cap.
    pub achieved: bool,
    pub steps: Vec<CalibrationStep>,
}

/// Smallest `n` in `{2^4, ..., 2^16}` whose estimates are within
/// `target_err` (L1, mean over trials, one-sided upper confidence bound) of a
/// reference estimate built from `16 n` points of the same distribution.
///
/// Trial `t` of candidate `n` always uses the stream `seed / n / t`, so the
/// accepted `n` is monotone in `target_err` for a fixed seed.
pub fn calibrate_sample_size(
    meta: &MetaDistribution,
    params: &CalibrationParams,
    grid: &GridSpec,
    seed: SeedStream,
) -> Result<Calibration> {
    let target = params.target_err;
    if !(target > 0.0) || target > 2.0 {
        return Err(Error::invalid("target_err", format!("must lie in (0, 2], got {target}")));
    }
    if target < grid.resolution() {
        return Err(Error::UnreachableTarget {
            target,
            resolution: grid.resolution(),
        });
    }
    if !(params.confidence > 0.0 && params.confidence < 1.0) {
        return Err(Error::invalid(
            "confidence",
            format!("must lie in (0, 1), got {}", params.confidence),
        ));
    }
    if params.trials < 50 {
        return Err(Error::invalid("trials", "calibration needs at least 50 trials"));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(params.confidence);

    let mut steps = Vec::new();
    for exp in CALIBRATION_MIN_EXP..=CALIBRATION_MAX_EXP {
        let n = 1usize << exp;
        let stream = seed.derive(n as u64);
        let errors = (0..params.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream.derive(t as u64).rng();
                let handle = meta.draw_distribution(&mut rng);
                let small = meta.draw_samples(&handle, n, &mut rng)?;
                let big = meta.draw_samples(&handle, REFERENCE_FACTOR * n, &mut rng)?;
                let p = DensityEstimate::with_default_bandwidth(small, params.kernel)?;
                let q = DensityEstimate::with_default_bandwidth(big, params.kernel)?;
                l1_distance(&p, &q, grid)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, stderr) = mean_and_stderr(&errors);
        let upper = mean + z * stderr;
        let accepted = upper <= target;
        steps.push(CalibrationStep {
            n,
            mean,
            stderr,
            upper,
            accepted,
        });
        if accepted {
            return Ok(Calibration {
                n,
                achieved: true,
                steps,
            });
        }
    }
    let cap = 1usize << CALIBRATION_MAX_EXP;
    warn!("sample-size calibration did not reach target {target}; using cap n = {cap}");
    Ok(Calibration {
        n: cap,
        achieved: false,
        steps,
    })
}

/// Sample mean and standard error (`sd / sqrt(len)`, `n - 1` denominator).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
