//! Confidence procedures `theta_hat +/- b(|v|)` as piecewise-linear bounds.
//!
//! Every bound lives on the standardized half-domain `u = |v| / K in [0, 2]`.
//! Four classical constructions (SD, NP, UMP, BC) and the two optimal
//! procedures (minimum search effort, minimum width given coverage) share
//! one representation so that coverage and risk integrals are exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cap;
use crate::error::{Error, Result};
use crate::model::SummaryStat;

/// Width of the steep ramp that stands in for the jump of the
/// minimum-search-effort bound.
pub const JUMP_EPS: f64 = 1e-9;

const SNAP_ZERO: f64 = 1e-15;
const COLLINEAR_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Procedure {
    /// Sampling distribution of the midrange: `theta_hat +/- k`.
    #[serde(rename = "SD")]
    Sd,
    /// Neyman-Pearson test inversion: `theta_hat +/- k|v|`.
    #[serde(rename = "NP")]
    Np,
    /// Uniformly most powerful test inversion: `min(|v|/2 + k, 1 - |v|/2)`.
    #[serde(rename = "UMP")]
    Ump,
    /// Central portion of the conditional support: `k(1 - |v|/2)`.
    #[serde(rename = "BC")]
    Bc,
    /// Minimum expected width at fixed level (bang-bang).
    #[serde(rename = "MIN_EFFORT")]
    MinEffort,
    /// Minimum expected width counted only on coverage (clipped constant).
    #[serde(rename = "MIN_COND_WIDTH")]
    MinCondWidth,
}

impl Procedure {
    pub const ALL: [Procedure; 6] = [
        Procedure::Sd,
        Procedure::Np,
        Procedure::Ump,
        Procedure::Bc,
        Procedure::MinEffort,
        Procedure::MinCondWidth,
    ];

    pub const CLASSICAL: [Procedure; 4] =
        [Procedure::Sd, Procedure::Np, Procedure::Ump, Procedure::Bc];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::Sd => "SD",
            Procedure::Np => "NP",
            Procedure::Ump => "UMP",
            Procedure::Bc => "BC",
            Procedure::MinEffort => "MIN_EFFORT",
            Procedure::MinCondWidth => "MIN_COND_WIDTH",
        }
    }

    /// Whether the raw bound can exceed the admissibility cap.
    pub fn can_be_inadmissible(self) -> bool {
        matches!(self, Procedure::Sd | Procedure::Np)
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Procedure::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown procedure '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProcedureKind {
    pub procedure: Procedure,
    /// Apply `min(b, 1 - u/2)`. Only changes SD and NP.
    pub truncated: bool,
}

impl ProcedureKind {
    pub fn new(procedure: Procedure, truncated: bool) -> Self {
        Self {
            procedure,
            truncated,
        }
    }

    pub fn truncated(procedure: Procedure) -> Self {
        Self::new(procedure, true)
    }

    pub fn raw(procedure: Procedure) -> Self {
        Self::new(procedure, false)
    }

    /// Whether the bound this kind produces is admissible by construction.
    pub fn is_admissible_kind(&self) -> bool {
        self.truncated || !self.procedure.can_be_inadmissible()
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.procedure.can_be_inadmissible() && !self.truncated {
            write!(f, "{}(raw)", self.procedure)
        } else {
            write!(f, "{}", self.procedure)
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Critical value `k_alpha` giving exact level `1 - alpha`.
///
/// UMP is only defined for `alpha <= 1/2`; beyond that `1 - sqrt(2 alpha)`
/// is negative and the request is rejected as unsupported.
pub fn critical_value(procedure: Procedure, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let k = match procedure {
        Procedure::Sd | Procedure::MinCondWidth => 1.0 - alpha.sqrt(),
        Procedure::Np => (1.0 - alpha) / (2.0 * alpha),
        Procedure::Ump => {
            if alpha > 0.5 {
                return Err(Error::Unsupported {
                    kind: procedure.name().to_string(),
                    alpha,
                });
            }
            (1.0 - (2.0 * alpha).sqrt()).max(0.0)
        }
        Procedure::Bc => 1.0 - alpha,
        Procedure::MinEffort => 2.0 * (1.0 - (1.0 - alpha).sqrt()),
    };
    Ok(k)
}

/// Bound `b(u)` on `u in [0, 2]`, linear between breakpoints and extended
/// evenly to `v in [-2, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearBound {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinearBound {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::InvalidBound(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidBound("need at least two breakpoints".into()));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 2.0 {
            return Err(Error::InvalidBound(
                "breakpoints must span exactly [0, 2]".into(),
            ));
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidBound(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if !values.iter().all(|y| y.is_finite() && *y >= 0.0) {
            return Err(Error::InvalidBound(
                "values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![0.0, 2.0], vec![value, value])
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        let (xs, ys) = points.iter().copied().unzip();
        Self::new(xs, ys)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Linear pieces as `((x0, y0), (x1, y1))`.
    pub fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        self.breakpoints.windows(2).zip(self.values.windows(2)).map(|(x, y)| ((x[0], y[0]), (x[1], y[1])))
    }

    /// `b(|v|)`; arguments beyond `|v| = 2` are clamped to the endpoint.
    pub fn eval(&self, v: f64) -> f64 {
        let u = v.abs().min(2.0);
        let xs = &self.breakpoints;
        // first index with xs[i] > u
        let i = xs.partition_point(|&x| x <= u);
        if i == 0 {
            return self.values[0];
        }
        if i == xs.len() {
            return *self.values.last().unwrap();
        }
        let (x0, x1) = (xs[i - 1], xs[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }

    /// Values on a uniform grid of `points` nodes spanning `[0, 2]`.
    pub fn sample_grid(&self, points: usize) -> Vec<(f64, f64)> {
        uniform_grid(points)
            .into_iter()
            .map(|u| (u, self.eval(u)))
            .collect()
    }

    /// Snaps near-zero values and drops collinear interior breakpoints.
    fn normalized(mut points: Vec<(f64, f64)>) -> Self {
        points.dedup_by(|b, a| b.0 <= a.0);
        for p in points.iter_mut() {
            if p.1 < SNAP_ZERO {
                p.1 = 0.0;
            }
        }
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for p in points {
            while out.len() >= 2 {
                let a = out[out.len() - 2];
                let b = out[out.len() - 1];
                let interp = a.1 + (p.1 - a.1) * (b.0 - a.0) / (p.0 - a.0);
                if (interp - b.1).abs() <= COLLINEAR_TOL {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(p);
        }
        let (xs, ys) = out.into_iter().unzip();
        Self {
            breakpoints: xs,
            values: ys,
        }
    }
}

/// `points` equally spaced nodes on `[0, 2]`, both ends included.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { 2.0 } else { 2.0 * i as f64 / last })
        .collect()
}

/// Pointwise `min(b(u), 1 - u/2)`, with the crossings of every segment
/// with the cap inserted as breakpoints.
pub fn truncate(b: &PiecewiseLinearBound) -> PiecewiseLinearBound {
    let mut pts = Vec::with_capacity(b.breakpoints.len() * 2);
    for ((x0, y0), (x1, y1)) in b.segments() {
        let d0 = y0 - cap(x0);
        let d1 = y1 - cap(x1);
        pts.push((x0, y0.min(cap(x0))));
        if (d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0) {
            let x = x0 + (x1 - x0) * d0 / (d0 - d1);
            if x > x0 && x < x1 {
                pts.push((x, cap(x)));
            }
        }
    }
    let (xl, yl) = (2.0, *b.values.last().unwrap());
    pts.push((xl, yl.min(cap(xl))));
    PiecewiseLinearBound::normalized(pts)
}

/// `b(u) <= 1 - u/2 + tol` everywhere. Checking breakpoints suffices since
/// `b - cap` is linear on every segment.
pub fn is_admissible(b: &PiecewiseLinearBound, tol: f64) -> bool {
    b.points().all(|(u, y)| y <= cap(u) + tol)
}

fn raw_bound(procedure: Procedure, k: f64) -> Result<PiecewiseLinearBound> {
    let pts: Vec<(f64, f64)> = match procedure {
        Procedure::Sd => vec![(0.0, k), (2.0, k)],
        Procedure::Np => vec![(0.0, 0.0), (2.0, 2.0 * k)],
        Procedure::Ump => {
            // u/2 + k meets 1 - u/2 at u = 1 - k
            let apex = 1.0 - k;
            vec![(0.0, k), (apex, cap(apex)), (2.0, 0.0)]
        }
        Procedure::Bc => vec![(0.0, k), (2.0, 0.0)],
        Procedure::MinEffort => {
            let lo = k - 0.5 * JUMP_EPS;
            let hi = k + 0.5 * JUMP_EPS;
            if lo <= 0.0 {
                vec![(0.0, 1.0), (2.0, 0.0)]
            } else if hi >= 2.0 {
                vec![(0.0, 0.0), (2.0, 0.0)]
            } else {
                vec![(0.0, 0.0), (lo, 0.0), (hi, cap(hi)), (2.0, 0.0)]
            }
        }
        Procedure::MinCondWidth => {
            let knee = 2.0 * (1.0 - k);
            vec![(0.0, k), (knee, k), (2.0, 0.0)]
        }
    };
    Ok(PiecewiseLinearBound::normalized(
        PiecewiseLinearBound::from_points(&pts)?.points().collect(),
    ))
}

/// Bound function of `kind` at level `1 - alpha`.
pub fn bound_function(kind: ProcedureKind, alpha: f64) -> Result<PiecewiseLinearBound> {
    let k = critical_value(kind.procedure, alpha)?;
    let raw = raw_bound(kind.procedure, k)?;
    if kind.truncated && kind.procedure.can_be_inadmissible() {
        Ok(truncate(&raw))
    } else {
        Ok(raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub center: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
    pub kind: ProcedureKind,
    pub alpha: f64,
}

impl IntervalEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lower <= theta && theta <= self.upper
    }
}

/// A procedure with its bound built once, for repeated interval evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceProcedure {
    pub kind: ProcedureKind,
    pub alpha: f64,
    pub bound: PiecewiseLinearBound,
}

impl ConfidenceProcedure {
    pub fn new(kind: ProcedureKind, alpha: f64) -> Result<Self> {
        Ok(Self {
            kind,
            alpha,
            bound: bound_function(kind, alpha)?,
        })
    }

    pub fn interval(&self, stat: &SummaryStat) -> Result<IntervalEstimate> {
        let u = stat.u();
        if u.is_nan() || u > 2.0 {
            return Err(Error::OutOfSupport {
                value: stat.v,
                lo: -2.0 * stat.k_scale,
                hi: 2.0 * stat.k_scale,
            });
        }
        let half_width = stat.k_scale * self.bound.eval(u);
        Ok(IntervalEstimate {
            center: stat.m,
            half_width,
            lower: stat.m - half_width,
            upper: stat.m + half_width,
            kind: self.kind,
            alpha: self.alpha,
        })
    }
}

/// `theta_hat +/- K b(|v| / K)` for an observed summary.
pub fn interval(kind: ProcedureKind, alpha: f64, stat: &SummaryStat) -> Result<IntervalEstimate> {
    ConfidenceProcedure::new(kind, alpha)?.interval(stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn critical_value_table() {
        assert!(close(critical_value(Procedure::Sd, 0.25).unwrap(), 0.5, 1e-15));
        assert!(close(critical_value(Procedure::Np, 0.5).unwrap(), 0.5, 1e-15));
        assert!(close(critical_value(Procedure::Bc, 0.5).unwrap(), 0.5, 1e-15));
        assert!(close(
            critical_value(Procedure::MinEffort, 0.5).unwrap(),
            0.585_786_437_626_904_9,
            1e-12
        ));
        assert_eq!(critical_value(Procedure::Ump, 0.5).unwrap(), 0.0);
        assert!(close(
            critical_value(Procedure::MinCondWidth, 0.25).unwrap(),
            0.5,
            1e-15
        ));
    }

    #[test]
    fn critical_value_rejects_bad_alpha() {
        for alpha in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            for p in Procedure::ALL {
                assert!(critical_value(p, alpha).is_err(), "{p} {alpha}");
            }
        }
        assert!(matches!(
            critical_value(Procedure::Ump, 0.7),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn bound_examples() {
        let bc = bound_function(ProcedureKind::raw(Procedure::Bc), 0.5).unwrap();
        assert!(close(bc.eval(1.0), 0.25, 1e-15));

        let me = bound_function(ProcedureKind::raw(Procedure::MinEffort), 0.5).unwrap();
        assert_eq!(me.eval(0.5), 0.0);
        assert!(close(me.eval(1.0), 0.5, 1e-15));
        assert!(close(me.eval(-1.0), 0.5, 1e-15));

        for p in Procedure::ALL {
            let b = bound_function(ProcedureKind::truncated(p), 0.25).unwrap();
            assert_eq!(b.eval(2.0), 0.0, "{p}");
        }
    }

    #[test]
    fn ump_matches_truncated_np_at_half() {
        let np = bound_function(ProcedureKind::truncated(Procedure::Np), 0.5).unwrap();
        let ump = bound_function(ProcedureKind::truncated(Procedure::Ump), 0.5).unwrap();
        for (u, y) in ump.sample_grid(4001) {
            assert!(close(y, np.eval(u), 1e-12), "u = {u}");
        }
    }

    #[test]
    fn truncate_examples() {
        let one = PiecewiseLinearBound::constant(1.0).unwrap();
        let t = truncate(&one);
        assert_eq!(t.breakpoints(), &[0.0, 2.0]);
        assert_eq!(t.values(), &[1.0, 0.0]);

        let bc = bound_function(ProcedureKind::raw(Procedure::Bc), 0.3).unwrap();
        assert_eq!(truncate(&bc), bc);

        let np = bound_function(ProcedureKind::raw(Procedure::Np), 0.25).unwrap();
        let t = truncate(&np);
        assert_eq!(t.breakpoints().len(), 3);
        assert!(close(t.breakpoints()[1], 0.5, 1e-15));
        assert!(close(t.values()[1], 0.75, 1e-15));
        // dense-grid pointwise-min oracle
        for (u, y) in t.sample_grid(10_001) {
            let expect = (1.5 * u).min(1.0 - u / 2.0);
            assert!(close(y, expect, 1e-12), "u = {u}");
        }
    }

    #[test]
    fn truncate_keeps_jump_ramp() {
        let me = bound_function(ProcedureKind::truncated(Procedure::MinEffort), 0.5).unwrap();
        assert_eq!(me.breakpoints().len(), 4);
        assert_eq!(truncate(&me), me);
    }

    #[test]
    fn admissibility_flags() {
        let sd = bound_function(ProcedureKind::raw(Procedure::Sd), 0.5).unwrap();
        assert!(!is_admissible(&sd, 1e-12));
        assert!(is_admissible(&truncate(&sd), 1e-12));
        let np = bound_function(ProcedureKind::raw(Procedure::Np), 0.5).unwrap();
        assert!(!is_admissible(&np, 1e-12));
        for alpha in [0.01, 0.3, 0.5, 0.9] {
            let bc = bound_function(ProcedureKind::raw(Procedure::Bc), alpha).unwrap();
            assert!(is_admissible(&bc, 0.0));
        }
    }

    #[test]
    fn bound_validation() {
        assert!(PiecewiseLinearBound::new(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(PiecewiseLinearBound::new(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]).is_err());
        assert!(PiecewiseLinearBound::new(vec![0.0, 2.0], vec![0.0, -1.0]).is_err());
        assert!(PiecewiseLinearBound::new(vec![0.0, 2.0], vec![0.0, f64::NAN]).is_err());
        assert!(PiecewiseLinearBound::new(vec![0.0, 2.0], vec![0.0]).is_err());
    }

    #[test]
    fn interval_examples() {
        let stat = |m, v, k| SummaryStat {
            m,
            v,
            n: 2,
            k_scale: k,
        };
        let sd = ProcedureKind::truncated(Procedure::Sd);
        let iv = interval(sd, 0.25, &stat(0.0, 0.0, 1.0)).unwrap();
        assert!(close(iv.half_width, 0.5, 1e-15));
        assert!(close(iv.lower, -0.5, 1e-15) && close(iv.upper, 0.5, 1e-15));

        let iv = interval(ProcedureKind::raw(Procedure::Bc), 0.5, &stat(2.0, 1.0, 1.0)).unwrap();
        assert!(close(iv.center, 2.0, 0.0) && close(iv.half_width, 0.25, 1e-15));

        for p in Procedure::ALL {
            for v in [2.0, -2.0] {
                let iv = interval(ProcedureKind::truncated(p), 0.25, &stat(0.0, v, 1.0)).unwrap();
                assert_eq!(iv.half_width, 0.0, "{p}");
            }
        }

        assert!(interval(sd, 0.25, &stat(0.0, 2.5, 1.0)).is_err());
        assert!(interval(sd, 0.25, &stat(0.0, 3.9, 2.0)).is_ok());
    }

    #[test]
    fn procedure_names_round_trip() {
        for p in Procedure::ALL {
            assert_eq!(p.name().parse::<Procedure>().unwrap(), p);
        }
        assert_eq!("min-effort".parse::<Procedure>().unwrap(), Procedure::MinEffort);
        assert!("foo".parse::<Procedure>().is_err());
    }
}
