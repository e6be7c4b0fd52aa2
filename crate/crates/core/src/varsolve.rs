//! Discretized versions of the two optimal-bound problems.
//!
//! Both problems minimize a separable functional of `b` on `u in [0, 2]`
//! subject to `0 <= b(u) <= 1 - u/2` and `int_0^2 b(u) du = 1 - alpha`.
//! On a midpoint grid the linear problem (weight `f_V`) is a continuous
//! knapsack and the quadratic problem is water-filling, so each has a
//! direct exact solver. The solutions are compared against the closed-form
//! procedures in [`crate::procedures`].

use serde::{Deserialize, Serialize};

use crate::cap;
use crate::error::{Error, Result};
use crate::model::density_v;
use crate::procedures::{bound_function, critical_value, PiecewiseLinearBound, Procedure, ProcedureKind};

pub const MIN_CELLS: usize = 10;

const MASS_TOL: f64 = 1e-12;
const MAX_BISECTIONS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Objective {
    /// `int b(v) f_V(v) dv`, half the expected width.
    LinearFvWeighted,
    /// `int b(v)^2 dv`, the width-given-coverage risk.
    Quadratic,
}

impl Objective {
    /// Closed-form optimum this objective should reproduce.
    pub fn closed_form(self) -> Procedure {
        match self {
            Objective::LinearFvWeighted => Procedure::MinEffort,
            Objective::Quadratic => Procedure::MinCondWidth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridProblem {
    pub n_cells: usize,
    pub objective: Objective,
}

impl GridProblem {
    pub fn new(n_cells: usize, objective: Objective) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidArgument(format!(
                "n_cells must be at least {MIN_CELLS}, got {n_cells}"
            )));
        }
        Ok(Self { n_cells, objective })
    }

    pub fn cell_width(&self) -> f64 {
        2.0 / self.n_cells as f64
    }

    pub fn midpoints(&self) -> Vec<f64> {
        let dx = self.cell_width();
        (0..self.n_cells).map(|i| (i as f64 + 0.5) * dx).collect()
    }

    pub fn caps(&self) -> Vec<f64> {
        self.midpoints().into_iter().map(cap).collect()
    }

    /// `sum c_i dx`; equals 1 up to rounding since the midpoint rule is
    /// exact for the linear cap.
    pub fn capacity(&self) -> f64 {
        self.caps().iter().sum::<f64>() * self.cell_width()
    }

    fn mass_target(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        let target = 1.0 - alpha;
        let capacity = self.capacity();
        if target > capacity + MASS_TOL {
            return Err(Error::Infeasible { target, capacity });
        }
        Ok(target)
    }

    /// Full-domain objective `Gamma(b)` of a grid solution.
    pub fn objective_value(&self, b: &[f64]) -> f64 {
        let dx = self.cell_width();
        match self.objective {
            Objective::LinearFvWeighted => {
                2.0 * dx
                    * self
                        .midpoints()
                        .iter()
                        .zip(b)
                        .map(|(&u, &bi)| bi * density_v(u))
                        .sum::<f64>()
            }
            Objective::Quadratic => 2.0 * dx * b.iter().map(|bi| bi * bi).sum::<f64>(),
        }
    }

    pub fn mass(&self, b: &[f64]) -> f64 {
        b.iter().sum::<f64>() * self.cell_width()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: GridProblem,
    pub alpha: f64,
    pub solution: Vec<f64>,
    pub objective_value: f64,
    /// Largest midpoint deviation from the closed form (jump cell excluded).
    pub closed_form_linf: f64,
    /// `int |b_grid - b_closed|` with the grid solution read as piecewise
    /// constant (jump cell excluded).
    pub closed_form_l1: f64,
    /// Cells filled (knapsack) or bisection steps (water-filling).
    pub iterations: u32,
    pub constraint_residual: f64,
    /// Water level for the quadratic problem; for the linear problem, the
    /// lower edge of the filled region.
    pub level: f64,
}

impl SolveReport {
    pub fn midpoints(&self) -> Vec<f64> {
        self.problem.midpoints()
    }
}

/// Cell holding the jump of the bang-bang optimum, if `kind` has one.
fn jump_cell(procedure: Procedure, alpha: f64, n_cells: usize) -> Result<Option<usize>> {
    if procedure != Procedure::MinEffort {
        return Ok(None);
    }
    let k = critical_value(procedure, alpha)?;
    let idx = (k / 2.0 * n_cells as f64).floor() as usize;
    Ok(Some(idx.min(n_cells - 1)))
}

/// `int_a^z |b(u) - c| du` exactly, splitting at breakpoints and crossings.
fn abs_diff_integral(b: &PiecewiseLinearBound, c: f64, a: f64, z: f64) -> f64 {
    let mut xs = vec![a];
    xs.extend(b.breakpoints().iter().copied().filter(|&x| x > a && x < z));
    xs.push(z);
    xs.windows(2)
        .map(|w| {
            let (x0, x1) = (w[0], w[1]);
            let (g0, g1) = (b.eval(x0) - c, b.eval(x1) - c);
            let h = x1 - x0;
            if g0 * g1 < 0.0 {
                let t = g0 / (g0 - g1);
                0.5 * h * (t * g0.abs() + (1.0 - t) * g1.abs())
            } else {
                0.5 * h * (g0 + g1).abs()
            }
        })
        .sum()
}

fn closed_form_distances(problem: &GridProblem, alpha: f64, solution: &[f64]) -> Result<(f64, f64)> {
    let procedure = problem.objective.closed_form();
    let closed = bound_function(ProcedureKind::truncated(procedure), alpha)?;
    let skip = jump_cell(procedure, alpha, problem.n_cells)?;
    let dx = problem.cell_width();
    let mut linf: f64 = 0.0;
    let mut l1 = 0.0;
    for (i, (&u, &bi)) in problem.midpoints().iter().zip(solution).enumerate() {
        if Some(i) == skip {
            continue;
        }
        linf = linf.max((bi - closed.eval(u)).abs());
        l1 += abs_diff_integral(&closed, bi, i as f64 * dx, (i + 1) as f64 * dx);
    }
    Ok((linf, l1))
}

fn finish(problem: GridProblem, alpha: f64, solution: Vec<f64>, iterations: u32, level: f64) -> Result<SolveReport> {
    let (closed_form_linf, closed_form_l1) = closed_form_distances(&problem, alpha, &solution)?;
    Ok(SolveReport {
        problem,
        alpha,
        objective_value: problem.objective_value(&solution),
        constraint_residual: (problem.mass(&solution) - (1.0 - alpha)).abs(),
        solution,
        closed_form_linf,
        closed_form_l1,
        iterations,
        level,
    })
}

/// Continuous-knapsack optimum of the linear problem.
///
/// The cost per unit mass `f_V(u_i)` strictly decreases in `u_i`, so cells
/// are filled to their caps from the largest `u` downward, with one
/// fractional cell at the margin. Equal costs would be broken toward the
/// larger `u`; none occur on the midpoint grid.
pub fn solve_linear(problem: &GridProblem, alpha: f64) -> Result<SolveReport> {
    let mut problem = *problem;
    problem.objective = Objective::LinearFvWeighted;
    let target = problem.mass_target(alpha)?;
    let dx = problem.cell_width();
    let caps = problem.caps();
    let mut solution = vec![0.0; problem.n_cells];
    let mut remaining = target;
    let mut filled = 0u32;
    let mut level = 2.0;
    for i in (0..problem.n_cells).rev() {
        if remaining <= 0.0 {
            break;
        }
        let take = (caps[i] * dx).min(remaining);
        solution[i] = take / dx;
        remaining -= take;
        filled += 1;
        level = i as f64 * dx + (1.0 - take / (caps[i] * dx)) * dx;
    }
    finish(problem, alpha, solution, filled, level)
}

/// Water-filling optimum `b_i = min(lambda, c_i)` of the quadratic problem.
///
/// `lambda` is bracketed by bisection on the mass `M(lambda)`, then solved
/// exactly on the resulting active set.
pub fn solve_quadratic(problem: &GridProblem, alpha: f64) -> Result<SolveReport> {
    let mut problem = *problem;
    problem.objective = Objective::Quadratic;
    let target = problem.mass_target(alpha)?;
    let dx = problem.cell_width();
    let caps = problem.caps();
    let mass = |lambda: f64| caps.iter().map(|&c| c.min(lambda)).sum::<f64>() * dx;

    let (mut lo, mut hi) = (0.0, caps.iter().copied().fold(0.0, f64::max));
    if !(mass(lo) <= target && target <= mass(hi) + MASS_TOL) {
        return Err(Error::NonBracketing);
    }
    let mut iterations = 0;
    let mut lambda = 0.5 * (lo + hi);
    while iterations < MAX_BISECTIONS {
        iterations += 1;
        lambda = 0.5 * (lo + hi);
        let m = mass(lambda);
        if (m - target).abs() <= MASS_TOL || hi - lo <= f64::EPSILON {
            break;
        }
        if m < target {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }

    // exact level on the active set {c_i > lambda}
    let (clipped_mass, active) = caps.iter().fold((0.0, 0usize), |(m, n), &c| {
        if c <= lambda {
            (m + c * dx, n)
        } else {
            (m, n + 1)
        }
    });
    if active > 0 {
        let exact = (target - clipped_mass) / (active as f64 * dx);
        let consistent = caps.iter().all(|&c| (c <= lambda) == (c <= exact));
        if consistent {
            lambda = exact;
        }
    }

    let solution = caps.iter().map(|&c| c.min(lambda)).collect();
    finish(problem, alpha, solution, iterations, lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub procedure: Procedure,
    pub alpha: f64,
    pub linf: f64,
    /// `dx * sum |b_i - b(u_i)|` over compared cells.
    pub l1: f64,
    pub tolerance: f64,
    pub exempt_cell: Option<usize>,
    pub pass: bool,
}

/// Distances between a grid solution and the closed-form bound of
/// `procedure`, sampled at the cell midpoints. Fails when the sup distance
/// exceeds two cell widths.
pub fn compare_to_closed_form(report: &SolveReport, procedure: Procedure, alpha: f64) -> Result<Discrepancy> {
    if !matches!(procedure, Procedure::MinEffort | Procedure::MinCondWidth) {
        return Err(Error::KindMismatch(procedure.name().to_string()));
    }
    let closed = bound_function(ProcedureKind::truncated(procedure), alpha)?;
    let n = report.solution.len();
    let skip = jump_cell(procedure, alpha, n)?;
    let dx = 2.0 / n as f64;
    let (mut linf, mut l1) = (0.0f64, 0.0);
    for (i, &bi) in report.solution.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = (bi - closed.eval((i as f64 + 0.5) * dx)).abs();
        linf = linf.max(d);
        l1 += d * dx;
    }
    let tolerance = 2.0 * dx;
    Ok(Discrepancy {
        procedure,
        alpha,
        linf,
        l1,
        tolerance,
        exempt_cell: skip,
        pass: linf <= tolerance,
    })
}
