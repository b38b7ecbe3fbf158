//! Smoothing kernels and the kernel density estimator.
//!
//! A [`KernelSpec`] is a radial profile `K(u)` on `u >= 0`. In one dimension
//! the three profiles are the familiar densities on the real line. In `k`
//! dimensions the estimator evaluates `K(|x - X_j| / b)` through the
//! Euclidean norm, so the profile has to be rescaled by a dimension-dependent
//! constant for the estimate to integrate to one. That constant is computed
//! numerically, once, when the estimate is built.
//!
//! ```
//! use distreg::{DensityEstimate, KernelSpec, Samples};
//!
//! let samples = Samples::from_scalars(vec![0.0, 2.0]).unwrap();
//! let kde = DensityEstimate::new(samples, 1.0, KernelSpec::Boxcar).unwrap();
//! assert_eq!(kde.eval(&[0.0]).unwrap(), 0.25);
//! assert_eq!(kde.eval(&[1.0]).unwrap(), 0.5);
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distance::GridSpec;
use crate::error::{Error, Result};
use crate::samples::Samples;

/// Beyond this scaled radius `exp(-u^2 / 2)` underflows to exactly zero.
const GAUSSIAN_CUTOFF: f64 = 40.0;

/// Simpson panels used for the radial normalization integral.
const RADIAL_PANELS: usize = 40_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    Boxcar,
    Epanechnikov,
    Gaussian,
}

impl KernelSpec {
    pub const ALL: [KernelSpec; 3] = [
        KernelSpec::Boxcar,
        KernelSpec::Epanechnikov,
        KernelSpec::Gaussian,
    ];

    /// Profile value `K(u)`. Negative arguments are folded onto `|u|`.
    #[inline]
    pub fn value(self, u: f64) -> f64 {
        let u = u.abs();
        match self {
            KernelSpec::Boxcar => {
                if u <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            KernelSpec::Epanechnikov => {
                if u <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            KernelSpec::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
        }
    }

    pub fn is_compact(self) -> bool {
        !matches!(self, KernelSpec::Gaussian)
    }

    /// Scaled radius outside of which the profile is exactly zero.
    pub fn support_radius(self) -> f64 {
        match self {
            KernelSpec::Boxcar | KernelSpec::Epanechnikov => 1.0,
            KernelSpec::Gaussian => GAUSSIAN_CUTOFF,
        }
    }

    /// Padding, in bandwidths, used when a quadrature grid is sized around a
    /// sample set. Three bandwidths contain all of a compact kernel's mass;
    /// the Gaussian tail beyond three bandwidths still carries ~0.3% of each
    /// edge point's mass, so it gets six.
    pub fn grid_padding(self) -> f64 {
        match self {
            KernelSpec::Boxcar | KernelSpec::Epanechnikov => 3.0,
            KernelSpec::Gaussian => 6.0,
        }
    }

    /// Constant `C_k` with `∫_{R^k} C_k K(|u|) du = 1`.
    ///
    /// The profiles are already densities on the line, so `k = 1` gives 1.
    /// For `k >= 2` the radial integral `S_{k-1} ∫ K(r) r^{k-1} dr` is
    /// evaluated with composite Simpson over the kernel's support.
    pub fn radial_normalization(self, dim: usize) -> f64 {
        if dim <= 1 {
            return 1.0;
        }
        let upper = self.support_radius();
        let h = upper / RADIAL_PANELS as f64;
        let integrand = |r: f64| self.value(r) * r.powi(dim as i32 - 1);
        let mut acc = integrand(0.0) + integrand(upper);
        for i in 1..RADIAL_PANELS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(i as f64 * h);
        }
        let radial = acc * h / 3.0;
        1.0 / (unit_sphere_area(dim) * radial)
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            KernelSpec::Boxcar => "boxcar",
            KernelSpec::Epanechnikov => "epanechnikov",
            KernelSpec::Gaussian => "gaussian",
        };
        f.write_str(name)
    }
}

/// Surface area of the unit sphere in `R^dim`.
pub(crate) fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        k => 2.0 * PI / (k as f64 - 2.0) * unit_sphere_area(k - 2),
    }
}

/// Plug-in bandwidth `sigma * n^(-1/(4+k))`, floored.
///
/// `sigma` is the average over coordinates of the sample standard deviation
/// (`n - 1` denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthRule {
    pub floor: f64,
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule { floor: 1e-3 }
    }
}

impl BandwidthRule {
    pub fn select(&self, samples: &Samples) -> Result<f64> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                found: n,
            });
        }
        let k = samples.dim();
        let mut mean = vec![0.0; k];
        for row in samples.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = vec![0.0; k];
        for row in samples.rows() {
            for j in 0..k {
                let dev = row[j] - mean[j];
                ss[j] += dev * dev;
            }
        }
        let sigma = ss
            .iter()
            .map(|s| (s / (n as f64 - 1.0)).sqrt())
            .sum::<f64>()
            / k as f64;
        let b = sigma * (n as f64).powf(-1.0 / (4.0 + k as f64));
        Ok(b.max(self.floor))
    }
}

/// Bandwidth from the default plug-in rule (floor `1e-3`).
pub fn select_bandwidth(samples: &Samples) -> Result<f64> {
    BandwidthRule::default().select(samples)
}

/// Kernel density estimate
/// `p(x) = (1/n) Σ_j b^{-k} C_k K(|x - X_j| / b)`.
///
/// Points are kept sorted by their first coordinate so that compact kernels
/// only visit the samples inside the query's window.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    points: Samples,
    bandwidth: f64,
    kernel: KernelSpec,
    scale: f64,
}

impl DensityEstimate {
    pub fn new(samples: Samples, bandwidth: f64, kernel: KernelSpec) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::NonPositiveBandwidth(bandwidth));
        }
        let dim = samples.dim();
        let n = samples.len();
        let points = sort_by_first_coordinate(samples);
        let scale = kernel.radial_normalization(dim) / (n as f64 * bandwidth.powi(dim as i32));
        Ok(DensityEstimate {
            points,
            bandwidth,
            kernel,
            scale,
        })
    }

    /// Build with the bandwidth chosen by [`select_bandwidth`].
    pub fn with_default_bandwidth(samples: Samples, kernel: KernelSpec) -> Result<Self> {
        let b = select_bandwidth(&samples)?;
        Self::new(samples, b, kernel)
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn points(&self) -> &Samples {
        &self.points
    }

    /// Componentwise bounds of the region where the estimate can be nonzero.
    pub fn support_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.kernel.support_radius() * self.bandwidth;
        let (mut lo, mut hi) = self.points.bounds();
        lo.iter_mut().for_each(|v| *v -= r);
        hi.iter_mut().for_each(|v| *v += r);
        (lo, hi)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let dim = self.dim();
        let data = self.points.as_flat();
        let n = self.points.len();
        let reach = self.kernel.support_radius() * self.bandwidth;
        let first = |i: usize| data[i * dim];
        let start = partition_point(n, |i| first(i) < x[0] - reach);
        let end = partition_point(n, |i| first(i) <= x[0] + reach);
        let inv_b = 1.0 / self.bandwidth;
        let mut acc = 0.0;
        if dim == 1 {
            for &p in &data[start..end] {
                acc += self.kernel.value((x[0] - p) * inv_b);
            }
        } else {
            for row in data[start * dim..end * dim].chunks_exact(dim) {
                let sq: f64 = row.iter().zip(x).map(|(p, q)| (q - p) * (q - p)).sum();
                acc += self.kernel.value(sq.sqrt() * inv_b);
            }
        }
        acc * self.scale
    }

    /// Values at every node of `grid`, in the grid's row-major node order.
    pub fn eval_grid(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: grid.dim(),
            });
        }
        let mut node = vec![0.0; grid.dim()];
        Ok((0..grid.node_count())
            .map(|flat| {
                grid.node_into(flat, &mut node);
                self.eval_unchecked(&node)
            })
            .collect())
    }
}

fn partition_point(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

fn sort_by_first_coordinate(samples: Samples) -> Samples {
    let dim = samples.dim();
    if dim == 1 {
        let mut v = samples.into_flat();
        v.sort_by(f64::total_cmp);
        return Samples::from_flat(v, 1).expect("non-empty");
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples.row(a)[0].total_cmp(&samples.row(b)[0]));
    let mut data = Vec::with_capacity(samples.as_flat().len());
    for i in order {
        data.extend_from_slice(samples.row(i));
    }
    Samples::from_flat(data, dim).expect("non-empty")
}
