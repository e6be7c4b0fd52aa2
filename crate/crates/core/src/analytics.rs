//! Coverage, width and risk of bound functions: exact integrals, Monte Carlo
//! estimates and the rescue simulation.
//!
//! On the standardized scale `V` has density `(2 - |v|)/4` and, given
//! `V = v`, the midrange is uniform on `theta +/- (1 - |v|/2)`. So the
//! conditional coverage of `theta_hat +/- b` is `min(b, 1 - u/2) / (1 - u/2)`
//! and, because `f_V(v) / (1 - |v|/2) = 1/2`, the unconditional coverage is
//! `int_0^2 min(b(u), 1 - u/2) du`. All exact integrals below are sums of
//! closed-form per-segment terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cap;
use crate::error::{Error, Result};
use crate::model::{summarize_coords, ModelConfig, Sampler};
use crate::procedures::{truncate, ConfidenceProcedure, PiecewiseLinearBound, ProcedureKind};

/// Shard count for Monte Carlo runs when the caller does not choose one.
pub const DEFAULT_SHARDS: usize = 16;

/// `int_x0^x1 f g` for `f`, `g` linear on the segment.
#[inline]
fn product_integral(h: f64, f0: f64, f1: f64, g0: f64, g1: f64) -> f64 {
    h / 6.0 * (2.0 * f0 * g0 + f0 * g1 + f1 * g0 + 2.0 * f1 * g1)
}

/// `P(theta in theta_hat +/- b | |V| = u)`; equal to 1 at the degenerate
/// endpoint `u = 2`.
pub fn conditional_coverage(b: &PiecewiseLinearBound, u: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&u) {
        return Err(Error::OutOfSupport {
            value: u,
            lo: 0.0,
            hi: 2.0,
        });
    }
    if u == 2.0 {
        return Ok(1.0);
    }
    let c = cap(u);
    Ok(b.eval(u).min(c) / c)
}

/// Exact level `int_0^2 min(b(u), 1 - u/2) du`.
pub fn exact_coverage(b: &PiecewiseLinearBound) -> f64 {
    truncate(b)
        .segments()
        .map(|((x0, y0), (x1, y1))| 0.5 * (x1 - x0) * (y0 + y1))
        .sum()
}

/// Expected interval width `E[2 b(V)] = int_0^2 b(u) (2 - u) du`.
pub fn expected_width(b: &PiecewiseLinearBound) -> f64 {
    b.segments()
        .map(|((x0, y0), (x1, y1))| product_integral(x1 - x0, y0, y1, 2.0 - x0, 2.0 - x1))
        .sum()
}

/// Minimum-search-effort risk `int_{-2}^{2} b(v) f_V(v) dv`, half the
/// expected width.
pub fn gamma_effort(b: &PiecewiseLinearBound) -> f64 {
    0.5 * expected_width(b)
}

/// Width-given-coverage risk `E[(U - L) 1{theta in (L, U)}] =
/// int_{-2}^{2} b(v)^2 dv`. Meaningful for admissible `b`.
pub fn gamma_cond(b: &PiecewiseLinearBound) -> f64 {
    2.0 * b
        .segments()
        .map(|((x0, y0), (x1, y1))| product_integral(x1 - x0, y0, y1, y0, y1))
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CoverageMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: u64,
    pub method: CoverageMethod,
    pub kind: ProcedureKind,
    pub alpha: f64,
}

impl CoverageReport {
    pub fn exact(kind: ProcedureKind, alpha: f64) -> Result<Self> {
        let procedure = ConfidenceProcedure::new(kind, alpha)?;
        Ok(Self {
            estimate: exact_coverage(&procedure.bound),
            std_error: 0.0,
            trials: 0,
            method: CoverageMethod::Exact,
            kind,
            alpha,
        })
    }
}

fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Trials handled by each of `shards` shards.
fn shard_sizes(trials: u64, shards: usize) -> Vec<u64> {
    let shards = shards.max(1) as u64;
    (0..shards)
        .map(|i| trials / shards + u64::from(i < trials % shards))
        .collect()
}

/// Per-shard tallies; merged in shard order so float sums are reproducible.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    trials: u64,
    covered: u64,
    effort: f64,
    effort_sq: f64,
    effort_covered: f64,
    effort_covered_sq: f64,
}

impl Tally {
    fn merge(mut self, other: &Tally) -> Tally {
        self.trials += other.trials;
        self.covered += other.covered;
        self.effort += other.effort;
        self.effort_sq += other.effort_sq;
        self.effort_covered += other.effort_covered;
        self.effort_covered_sq += other.effort_covered_sq;
        self
    }
}

fn run_shards<F>(config: &ModelConfig, trials: u64, seed: u64, shards: usize, per_trial: F) -> Result<Vec<Tally>>
where
    F: Fn(&[f64], &mut Tally) -> Result<()> + Sync,
{
    config.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    shard_sizes(trials, shards)
        .into_par_iter()
        .enumerate()
        .map(|(stream, n)| {
            let mut sampler = Sampler::new(*config, seed, stream as u64)?;
            let mut buf = Vec::with_capacity(config.n);
            let mut tally = Tally::default();
            for _ in 0..n {
                sampler.fill(&mut buf);
                tally.trials += 1;
                per_trial(&buf, &mut tally)?;
            }
            Ok(tally)
        })
        .collect()
}

fn mc_tally(kind: ProcedureKind, alpha: f64, config: &ModelConfig, trials: u64, seed: u64, shards: usize) -> Result<Tally> {
    let procedure = ConfidenceProcedure::new(kind, alpha)?;
    let theta = config.theta;
    let k = config.half_length;
    let tallies = run_shards(config, trials, seed, shards, |coords, tally| {
        let stat = summarize_coords(coords, k)?;
        let iv = procedure.interval(&stat)?;
        let effort = iv.width() / k;
        tally.effort += effort;
        tally.effort_sq += effort * effort;
        if iv.contains(theta) {
            tally.covered += 1;
            tally.effort_covered += effort;
            tally.effort_covered_sq += effort * effort;
        }
        Ok(())
    })?;
    Ok(tallies.iter().fold(Tally::default(), Tally::merge))
}

/// Monte Carlo coverage over `trials` draws split across [`DEFAULT_SHARDS`]
/// streams of `seed`.
pub fn mc_coverage(kind: ProcedureKind, alpha: f64, config: &ModelConfig, trials: u64, seed: u64) -> Result<CoverageReport> {
    mc_coverage_sharded(kind, alpha, config, trials, seed, DEFAULT_SHARDS)
}

pub fn mc_coverage_sharded(
    kind: ProcedureKind,
    alpha: f64,
    config: &ModelConfig,
    trials: u64,
    seed: u64,
    shards: usize,
) -> Result<CoverageReport> {
    let t = mc_tally(kind, alpha, config, trials, seed, shards)?;
    let p = t.covered as f64 / t.trials as f64;
    Ok(CoverageReport {
        estimate: p,
        std_error: binomial_se(p, t.trials),
        trials: t.trials,
        method: CoverageMethod::MonteCarlo,
        kind,
        alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub covered: u64,
    pub estimate: f64,
    pub std_error: f64,
    /// Exact conditional coverage at the bin midpoint.
    pub exact_mid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCoverageProfile {
    pub kind: ProcedureKind,
    pub alpha: f64,
    pub trials: u64,
    pub seed: u64,
    pub bins: Vec<ProfileBin>,
}

impl ConditionalCoverageProfile {
    pub fn bin_edges(&self) -> Vec<f64> {
        let mut edges: Vec<f64> = self.bins.iter().map(|b| b.lo).collect();
        edges.extend(self.bins.last().map(|b| b.hi));
        edges
    }
}

/// Empirical coverage binned by `u = |v|` on the standard model
/// (`theta = 0`, `K = 1`, `n = 2`).
pub fn mc_conditional_profile(
    kind: ProcedureKind,
    alpha: f64,
    bins: usize,
    trials: u64,
    seed: u64,
) -> Result<ConditionalCoverageProfile> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let procedure = ConfidenceProcedure::new(kind, alpha)?;
    let config = ModelConfig::standard();
    let per_shard: Vec<Result<(Vec<u64>, Vec<u64>)>> = shard_sizes(trials, DEFAULT_SHARDS)
        .into_par_iter()
        .enumerate()
        .map(|(stream, n)| {
            let mut sampler = Sampler::new(config, seed, stream as u64)?;
            let mut buf = Vec::with_capacity(2);
            let mut count = vec![0u64; bins];
            let mut covered = vec![0u64; bins];
            for _ in 0..n {
                sampler.fill(&mut buf);
                let stat = summarize_coords(&buf, 1.0)?;
                let idx = ((stat.u() * 0.5 * bins as f64) as usize).min(bins - 1);
                count[idx] += 1;
                if procedure.interval(&stat)?.contains(config.theta) {
                    covered[idx] += 1;
                }
            }
            Ok((count, covered))
        })
        .collect();

    let mut count = vec![0u64; bins];
    let mut covered = vec![0u64; bins];
    for shard in per_shard {
        let (c, k) = shard?;
        for i in 0..bins {
            count[i] += c[i];
            covered[i] += k[i];
        }
    }

    let width = 2.0 / bins as f64;
    let bins = (0..bins)
        .map(|i| {
            let lo = i as f64 * width;
            let hi = if i + 1 == bins { 2.0 } else { (i + 1) as f64 * width };
            let (p, se) = if count[i] > 0 {
                let p = covered[i] as f64 / count[i] as f64;
                (p, binomial_se(p, count[i]))
            } else {
                (f64::NAN, f64::NAN)
            };
            Ok(ProfileBin {
                lo,
                hi,
                count: count[i],
                covered: covered[i],
                estimate: p,
                std_error: se,
                exact_mid: conditional_coverage(&procedure.bound, 0.5 * (lo + hi))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ConditionalCoverageProfile {
        kind,
        alpha,
        trials,
        seed,
        bins,
    })
}

/// Outcome of repeated one-shot rescue attempts that search the whole
/// reported interval. Efforts are widths in units of `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescueReport {
    pub kind: ProcedureKind,
    pub alpha: f64,
    pub trials: u64,
    pub seed: u64,
    pub success_rate: f64,
    pub success_se: f64,
    pub mean_effort: f64,
    pub mean_effort_se: f64,
    /// `E[(U - L) 1{success}]`, the width-given-coverage risk.
    pub mean_effort_on_success: f64,
    /// `E[(U - L) 1{success}] / P(success)`; absent with no successes.
    pub mean_effort_given_success: Option<f64>,
    /// Delta-method standard error of the ratio above.
    pub mean_effort_given_success_se: Option<f64>,
}

pub fn rescue_simulation(kind: ProcedureKind, alpha: f64, config: &ModelConfig, trials: u64, seed: u64) -> Result<RescueReport> {
    rescue_simulation_sharded(kind, alpha, config, trials, seed, DEFAULT_SHARDS)
}

pub fn rescue_simulation_sharded(
    kind: ProcedureKind,
    alpha: f64,
    config: &ModelConfig,
    trials: u64,
    seed: u64,
    shards: usize,
) -> Result<RescueReport> {
    let t = mc_tally(kind, alpha, config, trials, seed, shards)?;
    let n = t.trials as f64;
    let p = t.covered as f64 / n;
    let mean_w = t.effort / n;
    let var_w = (t.effort_sq / n - mean_w * mean_w).max(0.0);
    let mean_y = t.effort_covered / n;
    let var_y = (t.effort_covered_sq / n - mean_y * mean_y).max(0.0);

    let (given, given_se) = if t.covered > 0 {
        let ratio = mean_y / p;
        // X = 1{success}, Y = width * X, so Cov(X, Y) = E[Y](1 - p).
        let cov_xy = mean_y * (1.0 - p);
        let var_x = p * (1.0 - p);
        let var_ratio = (var_y - 2.0 * ratio * cov_xy + ratio * ratio * var_x) / (p * p * n);
        (Some(ratio), Some(var_ratio.max(0.0).sqrt()))
    } else {
        (None, None)
    };

    Ok(RescueReport {
        kind,
        alpha,
        trials: t.trials,
        seed,
        success_rate: p,
        success_se: binomial_se(p, t.trials),
        mean_effort: mean_w,
        mean_effort_se: (var_w / n).sqrt(),
        mean_effort_on_success: mean_y,
        mean_effort_given_success: given,
        mean_effort_given_success_se: given_se,
    })
}

/// Coverage of `(U - c1, U + c2)` for a pivot `U ~ unif(theta - half, theta + half)`.
pub fn pivot_coverage(c1: f64, c2: f64, half: f64) -> f64 {
    (c1.clamp(0.0, half) + c2.clamp(0.0, half)) / (2.0 * half)
}

/// Scale `s >= 0` with `pivot_coverage(s c1, s c2, half) = level`, if one
/// exists. Coverage is at most `1/2` when one side is zero.
pub fn scale_to_level(c1: f64, c2: f64, half: f64, level: f64) -> Option<f64> {
    if !(c1 >= 0.0 && c2 >= 0.0 && half > 0.0 && (0.0..=1.0).contains(&level)) {
        return None;
    }
    if level == 0.0 {
        return Some(0.0);
    }
    let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
    if hi == 0.0 {
        return None;
    }
    // both sides below `half`
    let s = 2.0 * half * level / (lo + hi);
    if s * hi <= half {
        return Some(s);
    }
    // the wider side saturates at `half`
    if lo == 0.0 {
        return if level <= 0.5 { Some(half / hi) } else { None };
    }
    let s = half * (2.0 * level - 1.0) / lo;
    (s * lo <= half).then_some(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BernoulliEstimator {
    /// `(X1 + X2) / 2`
    Mean,
    /// `(X1 + X2) / 4 + 1/4`
    Shrunk,
    /// `(3 X1 + X2) / 4`
    Weighted,
}

impl BernoulliEstimator {
    pub const ALL: [BernoulliEstimator; 3] = [Self::Mean, Self::Shrunk, Self::Weighted];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Shrunk => "shrunk",
            Self::Weighted => "weighted",
        }
    }

    pub fn estimate(self, x1: u8, x2: u8) -> f64 {
        let (x1, x2) = (f64::from(x1), f64::from(x2));
        match self {
            Self::Mean => 0.5 * (x1 + x2),
            Self::Shrunk => 0.25 * (x1 + x2) + 0.25,
            Self::Weighted => 0.25 * (3.0 * x1 + x2),
        }
    }

    /// Mean squared error at `theta` by enumerating the four outcomes.
    pub fn mse(self, theta: f64) -> f64 {
        let mut risk = 0.0;
        for x1 in 0..=1u8 {
            for x2 in 0..=1u8 {
                let p1 = if x1 == 1 { theta } else { 1.0 - theta };
                let p2 = if x2 == 1 { theta } else { 1.0 - theta };
                let err = self.estimate(x1, x2) - theta;
                risk += p1 * p2 * err * err;
            }
        }
        risk
    }

    /// Average MSE under a uniform prior. MSE is a polynomial of degree at
    /// most 4 in theta, so five-point Boole quadrature is exact.
    pub fn average_risk(self) -> f64 {
        let w = [7.0, 32.0, 12.0, 32.0, 7.0];
        w.iter()
            .enumerate()
            .map(|(i, wi)| wi * self.mse(i as f64 / 4.0))
            .sum::<f64>()
            / 90.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliRiskSummary {
    pub estimator: BernoulliEstimator,
    pub average_risk: f64,
    pub average_risk_trapezoid: f64,
    pub max_risk: f64,
    pub argmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliRiskTable {
    pub theta: Vec<f64>,
    /// `mse[e][i]` is the risk of `BernoulliEstimator::ALL[e]` at `theta[i]`.
    pub mse: Vec<Vec<f64>>,
    pub summaries: Vec<BernoulliRiskSummary>,
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// Risk curves of the three estimators on a uniform theta grid, with their
/// average and maximum risks.
pub fn bernoulli_demo(grid_points: usize) -> Result<BernoulliRiskTable> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument("grid_points must be at least 2".into()));
    }
    let last = (grid_points - 1) as f64;
    let theta: Vec<f64> = (0..grid_points).map(|i| i as f64 / last).collect();
    let h = 1.0 / last;

    let mut mse = Vec::with_capacity(3);
    let mut summaries = Vec::with_capacity(3);
    for est in BernoulliEstimator::ALL {
        let curve: Vec<f64> = theta.iter().map(|&t| est.mse(t)).collect();
        let trap = h * (curve.iter().sum::<f64>() - 0.5 * (curve[0] + curve[grid_points - 1]));

        let (imax, _) = curve
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
        let (mut argmax, mut max_risk) = (theta[imax], curve[imax]);
        if imax > 0 && imax + 1 < grid_points {
            let t = golden_max(|t| est.mse(t), theta[imax - 1], theta[imax + 1]);
            if est.mse(t) > max_risk {
                argmax = t;
                max_risk = est.mse(t);
            }
        }
        summaries.push(BernoulliRiskSummary {
            estimator: est,
            average_risk: est.average_risk(),
            average_risk_trapezoid: trap,
            max_risk,
            argmax,
        });
        mse.push(curve);
    }
    Ok(BernoulliRiskTable {
        theta,
        mse,
        summaries,
    })
}
