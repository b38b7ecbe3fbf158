//! L1 distance between density estimates by trapezoid quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DensityEstimate;

pub const MAX_GRID_DIM: usize = 3;

/// Default nodes per axis for a grid of the given dimension.
pub fn default_points_per_axis(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 512,
        _ => 48,
    }
}

/// Largest per-axis node count [`GridSpec::covering`] will choose.
pub fn max_points_per_axis(dim: usize) -> usize {
    match dim {
        1 => 1 << 20,
        2 => 2048,
        _ => 128,
    }
}

/// Nodes per bandwidth that [`GridSpec::covering`] aims for. Boxcar jumps
/// cost `O(spacing / b)` of mass in one dimension, hence the finer target.
pub fn nodes_per_bandwidth(dim: usize) -> f64 {
    match dim {
        1 => 1024.0,
        2 => 64.0,
        _ => 16.0,
    }
}

/// Uniform tensor grid on the box `[lo, hi]`, at most three-dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points_per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.is_empty() || lo.len() > MAX_GRID_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be in 1..={MAX_GRID_DIM}, got {}",
                lo.len()
            )));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidGrid(
                "need at least 2 points per axis".into(),
            ));
        }
        for (j, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {j}: lo = {a} must be below hi = {b}"
                )));
            }
        }
        Ok(GridSpec {
            lo,
            hi,
            points_per_axis,
        })
    }

    pub fn with_default_resolution(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let p = default_points_per_axis(lo.len());
        Self::new(lo, hi, p)
    }

    /// Union bounding box of the estimates' samples, padded by
    /// `kernel.grid_padding()` times the largest bandwidth.
    ///
    /// Uses the default resolution, refined so the spacing is at most the
    /// smallest bandwidth over [`nodes_per_bandwidth`], up to
    /// [`max_points_per_axis`].
    pub fn covering(estimates: &[&DensityEstimate]) -> Result<Self> {
        let first = estimates.first().ok_or(Error::EmptySamples)?;
        let dim = first.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut pad: f64 = 0.0;
        let mut narrowest = f64::INFINITY;
        for est in estimates {
            if est.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: est.dim(),
                });
            }
            let (a, b) = est.points().bounds();
            for j in 0..dim {
                lo[j] = lo[j].min(a[j]);
                hi[j] = hi[j].max(b[j]);
            }
            pad = pad.max(est.kernel().grid_padding() * est.bandwidth());
            narrowest = narrowest.min(est.bandwidth());
        }
        lo.iter_mut().for_each(|v| *v -= pad);
        hi.iter_mut().for_each(|v| *v += pad);
        let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let wanted = (extent * nodes_per_bandwidth(dim) / narrowest).ceil() as usize + 1;
        let points = wanted
            .max(default_points_per_axis(dim))
            .min(max_points_per_axis(dim));
        Self::new(lo, hi, points)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dim() as u32)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.points_per_axis - 1) as f64
    }

    /// Coarsest node spacing; L1 distances below this are not resolved.
    pub fn resolution(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j)).fold(0.0, f64::max)
    }

    /// Write the coordinates of node `flat` (last axis fastest) into `out`.
    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        let p = self.points_per_axis;
        let mut rem = flat;
        for j in (0..self.dim()).rev() {
            let idx = rem % p;
            rem /= p;
            out[j] = if idx == p - 1 {
                self.hi[j]
            } else {
                self.lo[j] + idx as f64 * self.spacing(j)
            };
        }
    }

    /// Fails when a compact kernel's support escapes the grid.
    pub fn check_covers(&self, est: &DensityEstimate) -> Result<()> {
        if est.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: est.dim(),
            });
        }
        if !est.kernel().is_compact() {
            return Ok(());
        }
        let (need_lo, need_hi) = est.support_bounds();
        for j in 0..self.dim() {
            let slack = 1e-12 * (self.hi[j] - self.lo[j]);
            if need_lo[j] < self.lo[j] - slack || need_hi[j] > self.hi[j] + slack {
                return Err(Error::GridCoverage {
                    axis: j,
                    need_lo: need_lo[j],
                    need_hi: need_hi[j],
                    grid_lo: self.lo[j],
                    grid_hi: self.hi[j],
                });
            }
        }
        Ok(())
    }

    /// Evaluate `est` on the nodes after checking coverage.
    pub fn sample(&self, est: &DensityEstimate) -> Result<Vec<f64>> {
        self.check_covers(est)?;
        est.eval_grid(self)
    }

    /// Trapezoid rule for node values in this grid's node order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weighted_sum(values.len(), |i| values[i])
    }

    /// Trapezoid rule applied to `|a - b|`.
    pub fn integrate_abs_diff(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        self.weighted_sum(a.len(), |i| (a[i] - b[i]).abs())
    }

    fn weighted_sum(&self, len: usize, f: impl Fn(usize) -> f64) -> f64 {
        assert_eq!(len, self.node_count(), "value count does not match grid");
        let p = self.points_per_axis;
        let axis_weights: Vec<Vec<f64>> = (0..self.dim())
            .map(|j| {
                let h = self.spacing(j);
                (0..p)
                    .map(|i| if i == 0 || i == p - 1 { 0.5 * h } else { h })
                    .collect()
            })
            .collect();
        let mut total = 0.0;
        match self.dim() {
            1 => {
                for i in 0..p {
                    total += axis_weights[0][i] * f(i);
                }
            }
            2 => {
                for i in 0..p {
                    let mut row = 0.0;
                    for j in 0..p {
                        row += axis_weights[1][j] * f(i * p + j);
                    }
                    total += axis_weights[0][i] * row;
                }
            }
            _ => {
                for i in 0..p {
                    let mut plane = 0.0;
                    for j in 0..p {
                        let mut row = 0.0;
                        for k in 0..p {
                            row += axis_weights[2][k] * f((i * p + j) * p + k);
                        }
                        plane += axis_weights[1][j] * row;
                    }
                    total += axis_weights[0][i] * plane;
                }
            }
        }
        total
    }
}

/// `∫ |p(x) - q(x)| dx` on `grid` by the trapezoid rule.
pub fn l1_distance(p: &DensityEstimate, q: &DensityEstimate, grid: &GridSpec) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let a = grid.sample(p)?;
    let b = grid.sample(q)?;
    Ok(grid.integrate_abs_diff(&a, &b))
}

/// [`l1_distance`] on [`GridSpec::covering`] of the pair.
pub fn l1_distance_default(p: &DensityEstimate, q: &DensityEstimate) -> Result<f64> {
    let grid = GridSpec::covering(&[p, q])?;
    l1_distance(p, q, &grid)
}
