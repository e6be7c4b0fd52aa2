//! Independent oracles: bound formulas written directly from their
//! definitions and an adaptive Simpson integrator. Nothing here goes
//! through `PiecewiseLinearBound`.
#![allow(dead_code)]

use subci::Procedure;

pub fn cap(u: f64) -> f64 {
    1.0 - u / 2.0
}

/// Truncated bound of `p` at level `1 - alpha`, plus its kink/jump locations.
pub fn oracle_bound(p: Procedure, alpha: f64) -> (Box<dyn Fn(f64) -> f64>, Vec<f64>) {
    match p {
        Procedure::Sd | Procedure::MinCondWidth => {
            let k = 1.0 - alpha.sqrt();
            (Box::new(move |u| k.min(cap(u))), vec![2.0 * (1.0 - k)])
        }
        Procedure::Np => {
            let k = (1.0 - alpha) / (2.0 * alpha);
            (Box::new(move |u| (k * u).min(cap(u))), vec![1.0 / (k + 0.5)])
        }
        Procedure::Ump => {
            let k = 1.0 - (2.0 * alpha).sqrt();
            (Box::new(move |u| (u / 2.0 + k).min(cap(u))), vec![1.0 - k])
        }
        Procedure::Bc => {
            let k = 1.0 - alpha;
            (Box::new(move |u| k * cap(u)), vec![])
        }
        Procedure::MinEffort => {
            let k = 2.0 * (1.0 - (1.0 - alpha).sqrt());
            (Box::new(move |u| if u >= k { cap(u) } else { 0.0 }), vec![k])
        }
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive(f, a, m, left, tol / 2.0, depth - 1) + adaptive(f, m, b, right, tol / 2.0, depth - 1)
    }
}

/// `int_a^b f`, split at `points` where `f` or its derivative jumps.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, points: &[f64]) -> f64 {
    let mut xs = vec![a];
    let mut inner: Vec<f64> = points.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    xs.extend(inner);
    xs.push(b);
    xs.windows(2)
        .map(|w| {
            // piece endpoints are read from inside the piece so a jump at an
            // edge is seen from the correct side
            let (lo, hi) = (w[0], w[1]);
            let nudge = (hi - lo) * 1e-14;
            let g = |x: f64| {
                if x <= lo {
                    f(lo + nudge)
                } else if x >= hi {
                    f(hi - nudge)
                } else {
                    f(x)
                }
            };
            adaptive(&g, lo, hi, simpson(&g, lo, hi), 1e-14, 50)
        })
        .sum()
}

pub fn oracle_coverage(p: Procedure, alpha: f64) -> f64 {
    let (b, pts) = oracle_bound(p, alpha);
    integrate(&*b, 0.0, 2.0, &pts)
}

pub fn oracle_expected_width(p: Procedure, alpha: f64) -> f64 {
    let (b, pts) = oracle_bound(p, alpha);
    integrate(&|u| b(u) * (2.0 - u), 0.0, 2.0, &pts)
}

pub fn oracle_gamma_cond(p: Procedure, alpha: f64) -> f64 {
    let (b, pts) = oracle_bound(p, alpha);
    2.0 * integrate(&|u| b(u) * b(u), 0.0, 2.0, &pts)
}
