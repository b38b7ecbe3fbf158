//! Distribution regression by closest-point search over kernel density
//! estimates.
//!
//! Inputs to the regression are probability distributions observed only
//! through samples. The crate provides:
//!
//! - [`DensityEstimate`]: kernel density estimates with a plug-in bandwidth,
//! - [`l1_distance`]: L1 distance between estimates on a quadrature grid,
//! - [`MetaDistribution`]: synthetic location families with exact distances
//!   and Lipschitz labels,
//! - [`kernel_kernel_estimate`] and [`adaptive_closest_point`]: the two
//!   regression procedures,
//! - [`theory`]: Monte Carlo and exact checks of the nearest-neighbour
//!   scaling results the method relies on,
//! - [`experiment`]: the config-driven runner behind the `distreg` binary.
//!
//! ```
//! use distreg::{DensityEstimate, KernelSpec, Samples, l1_distance_default};
//!
//! let p = DensityEstimate::new(Samples::from_scalars(vec![0.0, 0.5, 1.0])?, 0.5, KernelSpec::Epanechnikov)?;
//! let q = DensityEstimate::new(Samples::from_scalars(vec![10.0, 10.5, 11.0])?, 0.5, KernelSpec::Epanechnikov)?;
//! let d = l1_distance_default(&p, &q)?;
//! assert!((d - 2.0).abs() < 1e-3);
//! # Ok::<(), distreg::Error>(())
//! ```

pub mod distance;
mod error;
pub mod experiment;
pub mod kernels;
pub mod meta;
pub mod regression;
mod samples;
pub mod seed;
pub mod theory;

pub use distance::{l1_distance, l1_distance_default, GridSpec};
pub use error::{Error, Result};
pub use kernels::{select_bandwidth, BandwidthRule, DensityEstimate, KernelSpec};
pub use meta::{DistributionHandle, Family, LabelFn, MetaDistribution, ParamBox};
pub use regression::{
    adaptive_closest_point, calibrate_sample_size, kernel_kernel_estimate, AdaptiveParams,
    AdaptiveResult, Calibration, CalibrationParams, LabeledEstimate,
};
pub use samples::Samples;
pub use seed::SeedStream;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    pub mod kernels {}
    #[doc = include_str!("../../../book/src/distance.md")]
    pub mod distance {}
    #[doc = include_str!("../../../book/src/meta.md")]
    pub mod meta {}
    #[doc = include_str!("../../../book/src/regression.md")]
    pub mod regression {}
    #[doc = include_str!("../../../book/src/theory.md")]
    pub mod theory {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
