//! Numerical checks of the nearest-neighbour distance bound.
//!
//! For a meta-distribution of doubling dimension `d` with `P(B(s, 1)) = 1`,
//! the expected distance from a support point `s` to the nearest of `m`
//! independent draws is at most `(2/(e-2) + 1) m^(-1/d)`. The argument runs
//! through a chain of intermediate facts, each checked here:
//!
//! * the small-ball bound `P(B(s, 2^-i)) >= 2^(-i d)` ([`check_small_ball_bound`]);
//! * the dyadic upper bound on an expectation over `[0, 1]`
//!   ([`dyadic_expectation_check`]);
//! * the dyadic-sum inequality on the nearest-neighbour distance
//!   ([`lemma1_sums`]) and its telescoping identity ([`telescoping_check`]);
//! * the ratio bound `e/2` that makes the head of the series geometric
//!   ([`head_sum_check`]);
//! * the final rate itself ([`expected_min_distance`],
//!   [`fit_scaling_exponent`], [`theorem1_rhs_bound`]).
//!
//! Monte Carlo checks use 3-sigma bands. Every trial draws from its own
//! stream derived from the caller's seed, and reductions run in trial order.

use std::f64::consts::E;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use crate::error::{Error, Result};
use crate::meta::{DistributionHandle, MetaDistribution};
use crate::regression::mean_and_stderr;
use crate::seed::SeedStream;

/// Truncation depth for the dyadic series; the tail is below `2^-40`.
pub const DEFAULT_I_MAX: u32 = 40;

/// Monte Carlo mean of a per-trial quantity and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Index `i` of the dyadic bucket `(2^-(i+1), 2^-i]` holding `t`, or `None`
/// when `t <= 2^-(i_max+1)`. Values above 1 land in bucket 0.
pub fn dyadic_bucket(t: f64, i_max: u32) -> Option<u32> {
    let mut upper = 1.0;
    for i in 0..=i_max {
        if t > 0.5 * upper {
            return Some(i);
        }
        upper *= 0.5;
    }
    None
}

fn min_distance_sample<R: rand::Rng + ?Sized>(
    meta: &MetaDistribution,
    s: &[f64],
    m: usize,
    rng: &mut R,
) -> f64 {
    (0..m)
        .map(|_| {
            let w = meta.draw_distribution(rng);
            meta.true_distance_to(s, w.theta())
        })
        .fold(f64::INFINITY, f64::min)
}

fn min_distances(
    meta: &MetaDistribution,
    s: &DistributionHandle,
    m: usize,
    trials: usize,
    seed: SeedStream,
) -> Vec<f64> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            min_distance_sample(meta, s.theta(), m, &mut rng)
        })
        .collect()
}

/// `E[min_{w in Omega} dist(s, w)]` over `trials` independent sets `Omega`
/// of `m` draws from `meta`.
pub fn expected_min_distance(
    meta: &MetaDistribution,
    s: &DistributionHandle,
    m: usize,
    trials: usize,
    seed: SeedStream,
) -> Result<Estimate> {
    if m == 0 || trials == 0 {
        return Err(Error::invalid("m/trials", "must be at least 1"));
    }
    let ds = min_distances(meta, s, m, trials, seed);
    let (mean, stderr) = mean_and_stderr(&ds);
    Ok(Estimate { mean, stderr })
}

/// Least-squares slope of `log(mean)` against `log(m)`.
pub fn fit_scaling_exponent(m_values: &[usize], means: &[f64]) -> Result<f64> {
    if m_values.len() != means.len() {
        return Err(Error::DimensionMismatch {
            expected: m_values.len(),
            found: means.len(),
        });
    }
    if m_values.len() < 2 {
        return Err(Error::invalid("m_values", "need at least two points"));
    }
    if let Some((index, &value)) = means.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveMean { index, value });
    }
    let xs: Vec<f64> = m_values.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = means.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("m_values", "need at least two distinct values"));
    }
    Ok(sxy / sxx)
}

/// `(2/(e-2) + 1) m^(-1/d)`.
pub fn theorem1_rhs_bound(d: f64, m: usize) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::invalid("d", format!("must be at least 1, got {d}")));
    }
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    Ok((2.0 / (E - 2.0) + 1.0) * (m as f64).powf(-1.0 / d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub d: f64,
    pub m_values: Vec<usize>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub bounds: Vec<f64>,
    pub slope: f64,
    pub trials: usize,
}

impl ScalingReport {
    /// Every mean sits below the closed-form envelope.
    pub fn within_envelope(&self) -> bool {
        self.means.iter().zip(&self.bounds).all(|(m, b)| m <= b)
    }

    /// Means decrease as `m` grows, allowing 3 standard errors of slack.
    pub fn monotone(&self) -> bool {
        self.means.windows(2).zip(self.stderrs.windows(2)).all(|(m, s)| {
            m[1] < m[0] + 3.0 * (s[0] * s[0] + s[1] * s[1]).sqrt()
        })
    }
}

/// Nearest-neighbour distance means over a ladder of `m`, with the fitted
/// log-log slope. `m = m_values[k]` uses the stream `seed / k`.
pub fn scaling_report(
    meta: &MetaDistribution,
    s: &DistributionHandle,
    m_values: &[usize],
    trials: usize,
    seed: SeedStream,
) -> Result<ScalingReport> {
    let d = meta.doubling_dimension() as f64;
    let mut means = Vec::with_capacity(m_values.len());
    let mut stderrs = Vec::with_capacity(m_values.len());
    let mut bounds = Vec::with_capacity(m_values.len());
    for (k, &m) in m_values.iter().enumerate() {
        let est = expected_min_distance(meta, s, m, trials, seed.derive(k as u64))?;
        means.push(est.mean);
        stderrs.push(est.stderr);
        bounds.push(theorem1_rhs_bound(d, m)?);
    }
    let slope = fit_scaling_exponent(m_values, &means)?;
    Ok(ScalingReport {
        d,
        m_values: m_values.to_vec(),
        means,
        stderrs,
        bounds,
        slope,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallBallReport {
    pub d: usize,
    /// `2^-i` for `i = 0..=i_max`.
    pub radii: Vec<f64>,
    pub empirical_mass: Vec<f64>,
    /// `2^(-i d)`.
    pub bound: Vec<f64>,
    /// Exact uniform-box mass of the ball.
    pub exact_mass: Vec<f64>,
    /// Binomial standard error at the bound, `sqrt(p (1-p) / trials)`.
    pub stderr: Vec<f64>,
    /// `empirical_mass >= bound - 3 * stderr`.
    pub holds: Vec<bool>,
    /// The hit count is inside the central `Φ(-3)..Φ(3)` range of the exact
    /// binomial law at the exact mass.
    pub exact_agrees: Vec<bool>,
    pub trials: usize,
}

impl SmallBallReport {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }

    pub fn exact_all_agree(&self) -> bool {
        self.exact_agrees.iter().all(|&h| h)
    }
}

/// Empirical mass of `B(s, 2^-i)` from `trials` single draws, against the
/// bound `2^(-i d)` and the exact mass.
///
/// The one-sided test uses the binomial standard error under the bound
/// itself, so radii too small for the sample to resolve pass rather than
/// fail on a zero count.
pub fn check_small_ball_bound(
    meta: &MetaDistribution,
    s: &DistributionHandle,
    i_max: u32,
    trials: usize,
    seed: SeedStream,
) -> Result<SmallBallReport> {
    if i_max == 0 || trials == 0 {
        return Err(Error::invalid("i_max/trials", "must be at least 1"));
    }
    let d = meta.doubling_dimension();
    let ds = min_distances(meta, s, 1, trials, seed);
    let n = trials as f64;
    let mut report = SmallBallReport {
        d,
        radii: Vec::new(),
        empirical_mass: Vec::new(),
        bound: Vec::new(),
        exact_mass: Vec::new(),
        stderr: Vec::new(),
        holds: Vec::new(),
        exact_agrees: Vec::new(),
        trials,
    };
    for i in 0..=i_max {
        let r = 0.5f64.powi(i as i32);
        let bound = 0.5f64.powi((i as usize * d) as i32);
        let hits = ds.iter().filter(|&&t| t <= r).count();
        let mass = hits as f64 / n;
        let exact = meta.ball_mass(s.theta(), r);
        let se_bound = (bound * (1.0 - bound) / n).sqrt();
        report.radii.push(r);
        report.empirical_mass.push(mass);
        report.bound.push(bound);
        report.exact_mass.push(exact);
        report.stderr.push(se_bound);
        report.holds.push(mass >= bound - 3.0 * se_bound);
        report.exact_agrees.push(binomial_within_three_sigma(hits, trials, exact));
    }
    Ok(report)
}

/// Both binomial tails at `hits` carry at least the normal 3-sigma tail
/// mass. Matches `|hits/n - p| <= 3 se` for large counts and stays valid
/// when `n p` is below one.
fn binomial_within_three_sigma(hits: usize, trials: usize, p: f64) -> bool {
    let tail = Normal::new(0.0, 1.0).expect("standard normal").cdf(-3.0);
    let law = Binomial::new(p.clamp(0.0, 1.0), trials as u64).expect("valid binomial");
    let k = hits as u64;
    let lower = law.cdf(k);
    let upper = if k == 0 { 1.0 } else { law.sf(k - 1) };
    lower >= tail && upper >= tail
}

/// `(1 - 2^(-a))^m` evaluated as `exp(m log1p(-2^-a))`.
fn survival(a: f64, m: usize) -> f64 {
    let x = 0.5f64.powf(a);
    if x >= 1.0 {
        0.0
    } else {
        (m as f64 * (-x).ln_1p()).exp()
    }
}

/// `Σ_{i=0}^{i_max} 2^-i ([1 - 2^{-(i+1)d}]^m - [1 - 2^{-i d}]^m)`.
pub fn lemma1_rhs(d: f64, m: usize, i_max: u32) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::invalid("d", format!("must be at least 1, got {d}")));
    }
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let mut total = 0.0;
    for i in 0..=i_max {
        let hi = survival((i + 1) as f64 * d, m);
        let lo = survival(i as f64 * d, m);
        total += 0.5f64.powi(i as i32) * (hi - lo);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Check {
    pub lhs: f64,
    pub rhs: f64,
    pub stderr: f64,
    pub holds: bool,
}

/// Monte Carlo dyadic histogram of the nearest-neighbour distance against
/// the closed-form series.
///
/// `lhs = Σ 2^-i P̂(2^-(i+1) < min-dist <= 2^-i)` is the mean of the
/// per-trial bucket weight, so its standard error is the usual one.
pub fn lemma1_sums(
    meta: &MetaDistribution,
    s: &DistributionHandle,
    m: usize,
    i_max: u32,
    trials: usize,
    seed: SeedStream,
) -> Result<Lemma1Check> {
    if 0.5f64.powi(i_max as i32) >= 1e-6 {
        return Err(Error::invalid(
            "i_max",
            format!("dyadic tail 2^-{i_max} must be below 1e-6"),
        ));
    }
    if m == 0 || trials == 0 {
        return Err(Error::invalid("m/trials", "must be at least 1"));
    }
    let d = meta.doubling_dimension() as f64;
    let weights: Vec<f64> = min_distances(meta, s, m, trials, seed)
        .into_iter()
        .map(|t| dyadic_bucket(t, i_max).map_or(0.0, |i| 0.5f64.powi(i as i32)))
        .collect();
    let (lhs, stderr) = mean_and_stderr(&weights);
    let rhs = lemma1_rhs(d, m, i_max)?;
    Ok(Lemma1Check {
        lhs,
        rhs,
        stderr,
        holds: lhs <= rhs + 3.0 * stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicCheck {
    /// Sample mean.
    pub exp: f64,
    /// `Σ 2^-i · fraction(2^-(i+1) < t <= 2^-i)`.
    pub dyadic_sum: f64,
    /// Fraction of samples at or below `2^-(i_max+1)`, not counted in any bucket.
    pub tail_mass: f64,
    pub i_max: u32,
}

impl DyadicCheck {
    /// `exp <= dyadic_sum + tail correction` and `dyadic_sum <= 2 exp`.
    pub fn contract_holds(&self) -> bool {
        let tail = self.tail_mass * 0.5f64.powi(self.i_max as i32 + 1);
        let tol = 1e-12;
        self.exp <= self.dyadic_sum + tail + tol && self.dyadic_sum <= 2.0 * self.exp + tol
    }
}

/// Compare the sample mean of `[0, 1]`-valued data with its dyadic upper
/// bound.
pub fn dyadic_expectation_check(samples: &[f64], i_max: u32) -> Result<DyadicCheck> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, t)| !(0.0..=1.0).contains(*t))
    {
        return Err(Error::SampleOutOfRange { index, value });
    }
    let n = samples.len() as f64;
    let mut dyadic = 0.0;
    let mut tail = 0usize;
    for &t in samples {
        match dyadic_bucket(t, i_max) {
            Some(i) => dyadic += 0.5f64.powi(i as i32),
            None => tail += 1,
        }
    }
    Ok(DyadicCheck {
        exp: samples.iter().sum::<f64>() / n,
        dyadic_sum: dyadic / n,
        tail_mass: tail as f64 / n,
        i_max,
    })
}

/// Result of the telescoping identity
/// `Σ_{j=1}^{i} ([1-2^{-jd}]^m - [1-2^{-(j-1)d}]^m) = [1-2^{-id}]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TelescopeCheck {
    pub lhs: BigRational,
    pub rhs: BigRational,
    /// Relative error of the same sum carried out in `f64`.
    pub float_rel_err: f64,
}

impl TelescopeCheck {
    pub fn exact(&self) -> bool {
        self.lhs == self.rhs
    }
}

fn exact_survival(j: u32, d: u32, m: u32) -> BigRational {
    let denom = BigInt::one() << (j * d) as usize;
    let base = BigRational::one() - BigRational::new(BigInt::one(), denom);
    num_traits::pow(base, m as usize)
}

/// Evaluate both sides of the telescoping identity in exact rational
/// arithmetic, and the left side in `f64` for comparison.
pub fn telescoping_check(d: u32, m: u32, i: u32) -> Result<TelescopeCheck> {
    if d == 0 || m == 0 || i == 0 {
        return Err(Error::invalid("d/m/i", "must be at least 1"));
    }
    let mut lhs = BigRational::zero();
    let mut float_sum = 0.0;
    for j in 1..=i {
        lhs += exact_survival(j, d, m) - exact_survival(j - 1, d, m);
        float_sum +=
            survival((j * d) as f64, m as usize) - survival(((j - 1) * d) as f64, m as usize);
    }
    let rhs = exact_survival(i, d, m);
    let reference = rhs.to_f64().unwrap_or(f64::NAN);
    let float_rel_err = if reference == 0.0 {
        float_sum.abs()
    } else {
        ((float_sum - reference) / reference).abs()
    };
    debug_assert!(!lhs.is_negative());
    Ok(TelescopeCheck {
        lhs,
        rhs,
        float_rel_err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeadSumCheck {
    /// `floor(log2(m) / d)`, the last index of the head.
    pub split: u32,
    /// Smallest ratio `x_i / x_{i-1}` over `1..=split`, `x_i = 2^-i e^{-m/2^{id}}`.
    pub min_ratio: f64,
    /// `Σ_{i=0}^{split} x_i`.
    pub head_sum: f64,
    /// `2 m^(-1/d) / (e - 2)`.
    pub head_bound: f64,
}

impl HeadSumCheck {
    pub fn holds(&self) -> bool {
        self.min_ratio >= E / 2.0 * (1.0 - 1e-12) && self.head_sum <= self.head_bound
    }
}

/// Ratio bound `e/2` and the geometric bound on the head of the series.
pub fn head_sum_check(d: u32, m: usize) -> Result<HeadSumCheck> {
    if d == 0 || m == 0 {
        return Err(Error::invalid("d/m", "must be at least 1"));
    }
    let df = d as f64;
    let mf = m as f64;
    let split = ((mf.log2() / df) + 1e-12).floor() as u32;
    let term = |i: u32| 0.5f64.powi(i as i32) * (-mf / 2f64.powf(i as f64 * df)).exp();
    let min_ratio = (1..=split)
        .map(|i| 0.5 * (mf / 2f64.powf(i as f64 * df) * (2f64.powf(df) - 1.0)).exp())
        .fold(f64::INFINITY, f64::min);
    let head_sum = (0..=split).map(term).sum();
    Ok(HeadSumCheck {
        split,
        min_ratio,
        head_sum,
        head_bound: 2.0 * mf.powf(-1.0 / df) / (E - 2.0),
    })
}
