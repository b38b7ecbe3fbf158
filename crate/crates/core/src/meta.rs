//! Synthetic meta-distributions with a known doubling dimension.
//!
//! A [`MetaDistribution`] draws location parameters `theta` uniformly from an
//! axis-aligned box in `R^d`; each `theta` names one member distribution
//! (a uniform box or an isotropic Gaussian centred at `theta`). Distances
//! between members are measured in the scaled sup-norm
//! `c * |theta_1 - theta_2|_inf`, under which the uniform measure on a
//! `d`-box is doubling with dimension `d` and balls are boxes, so their mass
//! has a closed form.
//!
//! The regression target is `f(P_theta) = L * g(theta)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distance::GridSpec;
use crate::error::{Error, Result};
use crate::samples::Samples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Uniform on the box `theta ± base_width / 2`.
    UniformLocation,
    /// Isotropic normal with mean `theta` and standard deviation `base_width`.
    GaussianLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelFn {
    CoordinateSum,
    EuclideanNorm,
}

impl LabelFn {
    pub fn apply(self, theta: &[f64]) -> f64 {
        match self {
            LabelFn::CoordinateSum => theta.iter().sum(),
            LabelFn::EuclideanNorm => theta.iter().map(|t| t * t).sum::<f64>().sqrt(),
        }
    }

    /// The norm in which `g` is 1-Lipschitz: l1 for the coordinate sum,
    /// l2 for the Euclidean norm.
    pub fn lipschitz_norm(self, delta: &[f64]) -> f64 {
        match self {
            LabelFn::CoordinateSum => delta.iter().map(|t| t.abs()).sum(),
            LabelFn::EuclideanNorm => delta.iter().map(|t| t * t).sum::<f64>().sqrt(),
        }
    }

    /// Lipschitz constant of `g` with respect to the sup-norm in `R^d`.
    pub fn sup_norm_constant(self, d: usize) -> f64 {
        match self {
            LabelFn::CoordinateSum => d as f64,
            LabelFn::EuclideanNorm => (d as f64).sqrt(),
        }
    }
}

/// Axis-aligned box. `lo[j] == hi[j]` is allowed and pins that coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::invalid("param_space", "dimension must be at least 1"));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a <= b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::invalid(
                    "param_space",
                    format!("need finite lo <= hi, got [{a}, {b}]"),
                ));
            }
        }
        Ok(ParamBox { lo, hi })
    }

    pub fn unit(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d])
    }

    /// A single point.
    pub fn atom(theta: Vec<f64>) -> Result<Self> {
        Self::new(theta.clone(), theta)
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

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(t, (a, b))| a <= t && t <= b)
    }

    /// Largest side length (the sup-norm diameter).
    pub fn sup_diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    }
}

/// One member `P_i` of the meta-distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionHandle {
    family: Family,
    theta: Vec<f64>,
}

impl DistributionHandle {
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn family(&self) -> Family {
        self.family
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDistribution {
    family: Family,
    param_space: ParamBox,
    base_width: f64,
    label_fn: LabelFn,
    lipschitz_const: f64,
    distance_scale: f64,
}

impl MetaDistribution {
    /// Fails unless `base_width`, `lipschitz_const` and `distance_scale` are
    /// positive and the parameter box has scaled diameter at most 1, which
    /// puts every member inside the unit ball of every other.
    pub fn new(
        family: Family,
        param_space: ParamBox,
        base_width: f64,
        label_fn: LabelFn,
        lipschitz_const: f64,
        distance_scale: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("base_width", base_width),
            ("lipschitz_const", lipschitz_const),
            ("distance_scale", distance_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        let diameter = distance_scale * param_space.sup_diameter();
        if diameter > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "distance_scale",
                format!("scaled parameter diameter {diameter} exceeds 1"),
            ));
        }
        Ok(MetaDistribution {
            family,
            param_space,
            base_width,
            label_fn,
            lipschitz_const,
            distance_scale,
        })
    }

    /// Uniform meta on `[0, 1]^d` with unit scale: the setting of the
    /// nearest-neighbour scaling experiments.
    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::new(
            Family::UniformLocation,
            ParamBox::unit(d)?,
            1.0,
            LabelFn::CoordinateSum,
            1.0,
            1.0,
        )
    }

    /// Scale `c` for which `c * |delta|` is the exact L1 distance between
    /// two one-dimensional members for small shifts (`2 / w` for uniform
    /// boxes with `|delta| <= w`, `sqrt(2/pi) / sigma` to first order for
    /// Gaussians).
    pub fn l1_matching_scale(family: Family, base_width: f64) -> f64 {
        match family {
            Family::UniformLocation => 2.0 / base_width,
            Family::GaussianLocation => (2.0 / std::f64::consts::PI).sqrt() / base_width,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn param_space(&self) -> &ParamBox {
        &self.param_space
    }

    pub fn base_width(&self) -> f64 {
        self.base_width
    }

    pub fn label_fn(&self) -> LabelFn {
        self.label_fn
    }

    pub fn lipschitz_const(&self) -> f64 {
        self.lipschitz_const
    }

    pub fn distance_scale(&self) -> f64 {
        self.distance_scale
    }

    pub fn doubling_dimension(&self) -> usize {
        self.param_space.dim()
    }

    /// Handle for an explicit parameter (test and harness use).
    pub fn handle(&self, theta: Vec<f64>) -> Result<DistributionHandle> {
        if theta.len() != self.doubling_dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.doubling_dimension(),
                found: theta.len(),
            });
        }
        if !self.param_space.contains(&theta) {
            return Err(Error::invalid("theta", "outside the parameter box"));
        }
        Ok(DistributionHandle {
            family: self.family,
            theta,
        })
    }

    pub fn center_handle(&self) -> DistributionHandle {
        DistributionHandle {
            family: self.family,
            theta: self.param_space.center(),
        }
    }

    /// Draw `P_i ~ Psi`: `theta` uniform on the parameter box.
    pub fn draw_distribution<R: Rng + ?Sized>(&self, rng: &mut R) -> DistributionHandle {
        let theta = self
            .param_space
            .lo
            .iter()
            .zip(&self.param_space.hi)
            .map(|(&a, &b)| {
                let u: f64 = rng.random();
                (a + u * (b - a)).min(b)
            })
            .collect();
        DistributionHandle {
            family: self.family,
            theta,
        }
    }

    /// `n` i.i.d. points from the member named by `handle`.
    pub fn draw_samples<R: Rng + ?Sized>(
        &self,
        handle: &DistributionHandle,
        n: usize,
        rng: &mut R,
    ) -> Result<Samples> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        self.check_handle(handle)?;
        let d = self.doubling_dimension();
        let w = self.base_width;
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            for &t in &handle.theta {
                let x = match self.family {
                    Family::UniformLocation => t + (rng.random::<f64>() - 0.5) * w,
                    Family::GaussianLocation => {
                        let z: f64 = StandardNormal.sample(rng);
                        t + w * z
                    }
                };
                data.push(x);
            }
        }
        Samples::from_flat(data, d)
    }

    /// The oracle's answer `Y = L * g(theta)`.
    pub fn oracle_label(&self, handle: &DistributionHandle) -> f64 {
        self.lipschitz_const * self.label_fn.apply(&handle.theta)
    }

    /// `c * |theta_1 - theta_2|_inf`.
    pub fn true_distance(&self, a: &DistributionHandle, b: &DistributionHandle) -> Result<f64> {
        if a.family != b.family || a.family != self.family {
            return Err(Error::FamilyMismatch);
        }
        self.check_handle(a)?;
        self.check_handle(b)?;
        Ok(self.distance_scale * sup_distance(&a.theta, &b.theta))
    }

    pub(crate) fn true_distance_to(&self, s: &[f64], theta: &[f64]) -> f64 {
        self.distance_scale * sup_distance(s, theta)
    }

    /// Constant `K` with `|f(P) - f(Q)| <= K * true_distance(P, Q)`.
    pub fn label_lipschitz_wrt_true_distance(&self) -> f64 {
        self.lipschitz_const * self.label_fn.sup_norm_constant(self.doubling_dimension())
            / self.distance_scale
    }

    /// Exact meta-measure of the closed ball of scaled radius `r` around `s`.
    ///
    /// Balls are sup-norm boxes, so the mass factors over coordinates.
    /// Degenerate axes contribute an indicator.
    pub fn ball_mass(&self, s: &[f64], r: f64) -> f64 {
        let rad = r / self.distance_scale;
        s.iter()
            .zip(self.param_space.lo.iter().zip(&self.param_space.hi))
            .map(|(&c, (&a, &b))| {
                if b == a {
                    if (c - a).abs() <= rad {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let overlap = (c + rad).min(b) - (c - rad).max(a);
                    (overlap.max(0.0) / (b - a)).min(1.0)
                }
            })
            .product()
    }

    /// Quadrature grid containing the support of every member, plus `pad`
    /// on each side. Gaussian members are cut at eight standard deviations.
    pub fn covering_grid(&self, pad: f64, points_per_axis: usize) -> Result<GridSpec> {
        let half = match self.family {
            Family::UniformLocation => 0.5 * self.base_width,
            Family::GaussianLocation => 8.0 * self.base_width,
        };
        let lo = self.param_space.lo.iter().map(|a| a - half - pad).collect();
        let hi = self.param_space.hi.iter().map(|b| b + half + pad).collect();
        GridSpec::new(lo, hi, points_per_axis)
    }

    fn check_handle(&self, h: &DistributionHandle) -> Result<()> {
        if h.family != self.family {
            return Err(Error::FamilyMismatch);
        }
        if h.theta.len() != self.doubling_dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.doubling_dimension(),
                found: h.theta.len(),
            });
        }
        Ok(())
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
