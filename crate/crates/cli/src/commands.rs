//! Subcommand implementations. Each builds its records in memory and
//! renders them; writing to disk happens in [`write_output`].

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use subci::analytics::{
    bernoulli_demo, exact_coverage, mc_conditional_profile, mc_coverage_sharded, rescue_simulation_sharded,
};
use subci::procedures::{bound_function, truncate, uniform_grid};
use subci::varsolve::{compare_to_closed_form, solve_linear, solve_quadratic, GridProblem, Objective, SolveReport};
use subci::{cap, Error, PiecewiseLinearBound, Procedure, ProcedureKind};

use crate::config::{Command, RunConfig};
use crate::output::{render, Format};

/// `b_raw` above the cap by more than this is flagged inadmissible.
pub const ADMISSIBLE_TOL: f64 = 1e-12;
/// Monte Carlo agreement threshold in standard errors.
pub const MC_Z_LIMIT: f64 = 3.5;

pub const PASS: &str = "PASS";
pub const FAIL: &str = "FAIL";
pub const OK: &str = "OK";
pub const UNSUPPORTED: &str = "unsupported";

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub artifacts: Vec<Artifact>,
    /// False when any row carries a FAIL or error marker.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub kind: String,
    pub alpha: f64,
    pub u: f64,
    pub b_raw: f64,
    pub b_truncated: f64,
    pub cap: f64,
    pub admissible_flag: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub kind: String,
    pub alpha: f64,
    pub truncated: bool,
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub figure: u8,
    pub kind: String,
    pub alpha: f64,
    pub u: f64,
    pub b_raw: f64,
    pub b_truncated: f64,
    pub cap: f64,
    pub admissible_flag: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub kind: String,
    pub truncated: bool,
    pub alpha: f64,
    pub exact: Option<f64>,
    pub mc: Option<f64>,
    pub se: Option<f64>,
    pub trials: Option<u64>,
    pub z: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub kind: String,
    pub truncated: bool,
    pub alpha: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub covered: u64,
    pub estimate: f64,
    pub se: f64,
    pub exact_mid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRow {
    pub solver: String,
    pub alpha: f64,
    pub n_cells: usize,
    pub objective_value: f64,
    pub level: f64,
    pub residual: f64,
    pub closed_form_linf: f64,
    pub closed_form_l1: f64,
    pub iterations: u32,
    pub compared_to: String,
    pub cmp_linf: f64,
    pub cmp_l1: f64,
    pub tolerance: f64,
    pub exempt_cell: Option<usize>,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub solver: String,
    pub alpha: f64,
    pub u: f64,
    pub b: f64,
    pub cap: f64,
    pub closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub kind: String,
    pub truncated: bool,
    pub alpha: f64,
    pub trials: Option<u64>,
    pub seed: u64,
    pub success_rate: Option<f64>,
    pub success_se: Option<f64>,
    pub mean_effort: Option<f64>,
    pub mean_effort_se: Option<f64>,
    pub mean_effort_on_success: Option<f64>,
    pub mean_effort_given_success: Option<f64>,
    pub mean_effort_given_success_se: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliRow {
    pub record: String,
    pub estimator: String,
    pub theta: Option<f64>,
    pub mse: Option<f64>,
    pub average_risk: Option<f64>,
    pub average_risk_trapezoid: Option<f64>,
    pub max_risk: Option<f64>,
    pub argmax: Option<f64>,
}

fn is_unsupported(e: &Error) -> bool {
    matches!(e, Error::Unsupported { .. })
}

pub fn run(config: &RunConfig) -> Result<CommandOutput> {
    match config.command {
        Command::Bounds => cmd_bounds(config),
        Command::Coverage => cmd_coverage(config),
        Command::Profile => cmd_profile(config),
        Command::Optimize => cmd_optimize(config),
        Command::Simulate => cmd_simulate(config),
        Command::Figures => cmd_figures(config),
        Command::Bernoulli => cmd_bernoulli(config),
    }
}

fn single(config: &RunConfig, contents: String, ok: bool) -> CommandOutput {
    CommandOutput {
        artifacts: vec![Artifact {
            path: config.out.clone(),
            contents,
        }],
        ok,
    }
}

fn bound_pair(procedure: Procedure, alpha: f64) -> Result<(PiecewiseLinearBound, PiecewiseLinearBound)> {
    let raw = bound_function(ProcedureKind::raw(procedure), alpha)?;
    let truncated = truncate(&raw);
    Ok((raw, truncated))
}

/// (u, b_raw, b_truncated, cap, admissible_flag)
type BoundSample = (f64, f64, f64, f64, u8);

fn bound_rows(procedure: Procedure, alpha: f64, us: &[f64]) -> Result<Vec<BoundSample>> {
    let (raw, truncated) = bound_pair(procedure, alpha)?;
    Ok(us
        .iter()
        .map(|&u| {
            let (b, c) = (raw.eval(u), cap(u));
            let flag = u8::from(b <= c + ADMISSIBLE_TOL);
            (u, b, truncated.eval(u), c, flag)
        })
        .collect())
}

/// Distinct procedures of the configured kinds, in first-seen order.
fn procedures(config: &RunConfig) -> Vec<Procedure> {
    let mut out: Vec<Procedure> = Vec::new();
    for k in &config.kinds {
        if !out.contains(&k.procedure) {
            out.push(k.procedure);
        }
    }
    out
}

/// Raw and truncated bounds on a uniform grid; JSON output carries the
/// breakpoint records instead.
pub fn cmd_bounds(config: &RunConfig) -> Result<CommandOutput> {
    let header = config.header_lines();
    let mut ok = true;
    let contents = match config.format {
        Format::Csv => {
            let grid = uniform_grid(config.grid);
            let mut rows = Vec::new();
            for &alpha in &config.alphas {
                for p in procedures(config) {
                    match bound_rows(p, alpha, &grid) {
                        Ok(r) => rows.extend(r.into_iter().map(|(u, b_raw, b_truncated, cap, admissible_flag)| BoundRow {
                            kind: p.to_string(),
                            alpha,
                            u,
                            b_raw,
                            b_truncated,
                            cap,
                            admissible_flag,
                        })),
                        Err(e) if e.downcast_ref::<Error>().is_some_and(is_unsupported) => ok = false,
                        Err(e) => return Err(e),
                    }
                }
            }
            render(&header, &rows, Format::Csv)?
        }
        Format::Json => {
            let mut records = Vec::new();
            for &alpha in &config.alphas {
                for p in procedures(config) {
                    match bound_pair(p, alpha) {
                        Ok((raw, truncated)) => {
                            for (flag, b) in [(false, raw), (true, truncated)] {
                                records.push(BoundRecord {
                                    kind: p.to_string(),
                                    alpha,
                                    truncated: flag,
                                    breakpoints: b.breakpoints().to_vec(),
                                    values: b.values().to_vec(),
                                });
                            }
                        }
                        Err(e) if e.downcast_ref::<Error>().is_some_and(is_unsupported) => ok = false,
                        Err(e) => return Err(e),
                    }
                }
            }
            render(&header, &records, Format::Json)?
        }
    };
    Ok(single(config, contents, ok))
}

/// Exact coverage next to a Monte Carlo estimate per (kind, alpha).
pub fn cmd_coverage(config: &RunConfig) -> Result<CommandOutput> {
    let model = config.model();
    let mut rows = Vec::new();
    for &alpha in &config.alphas {
        for &kind in &config.kinds {
            let base = CoverageRow {
                kind: kind.procedure.to_string(),
                truncated: kind.truncated,
                alpha,
                exact: None,
                mc: None,
                se: None,
                trials: None,
                z: None,
                status: UNSUPPORTED.to_string(),
            };
            let bound = match bound_function(kind, alpha) {
                Ok(b) => b,
                Err(e) if is_unsupported(&e) => {
                    rows.push(base);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let exact = exact_coverage(&bound);
            let mc = mc_coverage_sharded(kind, alpha, &model, config.trials, config.seed, config.shards)?;
            let diff = (mc.estimate - exact).abs();
            let z = if mc.std_error > 0.0 { diff / mc.std_error } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            rows.push(CoverageRow {
                exact: Some(exact),
                mc: Some(mc.estimate),
                se: Some(mc.std_error),
                trials: Some(mc.trials),
                z: z.is_finite().then_some(z),
                status: if z <= MC_Z_LIMIT { PASS } else { FAIL }.to_string(),
                ..base
            });
        }
    }
    let ok = rows.iter().all(|r| r.status == PASS);
    Ok(single(config, render(&config.header_lines(), &rows, config.format)?, ok))
}

/// Conditional coverage by |v| bin, one row per bin.
pub fn cmd_profile(config: &RunConfig) -> Result<CommandOutput> {
    let mut rows = Vec::new();
    let mut ok = true;
    for &alpha in &config.alphas {
        for &kind in &config.kinds {
            let profile = match mc_conditional_profile(kind, alpha, config.bins, config.trials, config.seed) {
                Ok(p) => p,
                Err(e) if is_unsupported(&e) => {
                    ok = false;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            rows.extend(profile.bins.iter().map(|b| ProfileRow {
                kind: kind.procedure.to_string(),
                truncated: kind.truncated,
                alpha,
                lo: b.lo,
                hi: b.hi,
                count: b.count,
                covered: b.covered,
                estimate: b.estimate,
                se: b.std_error,
                exact_mid: b.exact_mid,
            }));
        }
    }
    Ok(single(config, render(&config.header_lines(), &rows, config.format)?, ok))
}

fn optimize_row(report: &SolveReport, solver: &str, procedure: Procedure, alpha: f64) -> Result<OptimizeRow> {
    let d = compare_to_closed_form(report, procedure, alpha)?;
    let pass = d.pass && report.constraint_residual <= 1e-12;
    Ok(OptimizeRow {
        solver: solver.to_string(),
        alpha,
        n_cells: report.problem.n_cells,
        objective_value: report.objective_value,
        level: report.level,
        residual: report.constraint_residual,
        closed_form_linf: report.closed_form_linf,
        closed_form_l1: report.closed_form_l1,
        iterations: report.iterations,
        compared_to: procedure.to_string(),
        cmp_linf: d.linf,
        cmp_l1: d.l1,
        tolerance: d.tolerance,
        exempt_cell: d.exempt_cell,
        verdict: if pass { PASS } else { FAIL }.to_string(),
    })
}

/// Knapsack and water-filling solutions per alpha with closed-form verdicts.
pub fn cmd_optimize(config: &RunConfig) -> Result<CommandOutput> {
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    for &alpha in &config.alphas {
        let runs = [
            ("knapsack", Objective::LinearFvWeighted, solve_linear as fn(&GridProblem, f64) -> subci::Result<SolveReport>),
            ("water_filling", Objective::Quadratic, solve_quadratic),
        ];
        for (solver, objective, solve) in runs {
            let problem = GridProblem::new(config.cells, objective)?;
            let report = solve(&problem, alpha)?;
            let procedure = objective.closed_form();
            rows.push(optimize_row(&report, solver, procedure, alpha)?);
            if config.solutions.is_some() {
                let closed = bound_function(ProcedureKind::truncated(procedure), alpha)?;
                solutions.extend(problem.midpoints().into_iter().zip(&report.solution).map(|(u, &b)| SolutionRow {
                    solver: solver.to_string(),
                    alpha,
                    u,
                    b,
                    cap: cap(u),
                    closed_form: closed.eval(u),
                }));
            }
        }
    }
    let ok = rows.iter().all(|r| r.verdict == PASS);
    let header = config.header_lines();
    let mut artifacts = vec![Artifact {
        path: config.out.clone(),
        contents: render(&header, &rows, config.format)?,
    }];
    if let Some(path) = &config.solutions {
        artifacts.push(Artifact {
            path: Some(path.clone()),
            contents: render(&header, &solutions, config.format)?,
        });
    }
    Ok(CommandOutput { artifacts, ok })
}

/// Rescue simulation per (kind, alpha).
pub fn cmd_simulate(config: &RunConfig) -> Result<CommandOutput> {
    let model = config.model();
    let mut rows = Vec::new();
    for &alpha in &config.alphas {
        for &kind in &config.kinds {
            let base = SimulateRow {
                kind: kind.procedure.to_string(),
                truncated: kind.truncated,
                alpha,
                trials: None,
                seed: config.seed,
                success_rate: None,
                success_se: None,
                mean_effort: None,
                mean_effort_se: None,
                mean_effort_on_success: None,
                mean_effort_given_success: None,
                mean_effort_given_success_se: None,
                status: UNSUPPORTED.to_string(),
            };
            match rescue_simulation_sharded(kind, alpha, &model, config.trials, config.seed, config.shards) {
                Ok(r) => rows.push(SimulateRow {
                    trials: Some(r.trials),
                    success_rate: Some(r.success_rate),
                    success_se: Some(r.success_se),
                    mean_effort: Some(r.mean_effort),
                    mean_effort_se: Some(r.mean_effort_se),
                    mean_effort_on_success: Some(r.mean_effort_on_success),
                    mean_effort_given_success: r.mean_effort_given_success,
                    mean_effort_given_success_se: r.mean_effort_given_success_se,
                    status: OK.to_string(),
                    ..base
                }),
                Err(e) if is_unsupported(&e) => rows.push(base),
                Err(e) => return Err(e.into()),
            }
        }
    }
    let ok = rows.iter().all(|r| r.status == OK);
    Ok(single(config, render(&config.header_lines(), &rows, config.format)?, ok))
}

fn figure_rows(figure: u8, procs: &[Procedure], alphas: &[f64], grid: usize) -> Result<Vec<FigureRow>> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        for &p in procs {
            let (raw, truncated) = bound_pair(p, alpha)?;
            // grid plus every breakpoint, so kinks and jumps plot exactly
            let mut us = uniform_grid(grid);
            us.extend(raw.breakpoints());
            us.extend(truncated.breakpoints());
            us.sort_by(f64::total_cmp);
            us.dedup();
            rows.extend(bound_rows(p, alpha, &us)?.into_iter().map(|(u, b_raw, b_truncated, cap, admissible_flag)| FigureRow {
                figure,
                kind: p.to_string(),
                alpha,
                u,
                b_raw,
                b_truncated,
                cap,
                admissible_flag,
            }));
        }
    }
    Ok(rows)
}

/// Classical bounds with admissibility flags, and the two optimal bounds.
pub fn cmd_figures(config: &RunConfig) -> Result<CommandOutput> {
    let header = config.header_lines();
    let fig1 = figure_rows(1, &Procedure::CLASSICAL, &config.alphas, config.grid);
    let fig2 = figure_rows(2, &[Procedure::MinEffort, Procedure::MinCondWidth], &config.alphas, config.grid)?;
    let mut ok = true;
    let fig1 = match fig1 {
        Ok(rows) => rows,
        Err(e) if e.downcast_ref::<Error>().is_some_and(is_unsupported) => {
            ok = false;
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let ext = config.format.extension();
    let path = |name: &str| config.out.as_ref().map(|dir| dir.join(format!("{name}.{ext}")));
    Ok(CommandOutput {
        artifacts: vec![
            Artifact {
                path: path("figure1"),
                contents: render(&header, &fig1, config.format)?,
            },
            Artifact {
                path: path("figure2"),
                contents: render(&header, &fig2, config.format)?,
            },
        ],
        ok,
    })
}

/// Bernoulli MSE curves in long form, then one summary row per estimator.
pub fn cmd_bernoulli(config: &RunConfig) -> Result<CommandOutput> {
    let table = bernoulli_demo(config.grid)?;
    let blank = |record: &str, estimator: &str| BernoulliRow {
        record: record.to_string(),
        estimator: estimator.to_string(),
        theta: None,
        mse: None,
        average_risk: None,
        average_risk_trapezoid: None,
        max_risk: None,
        argmax: None,
    };
    let mut rows = Vec::new();
    for (s, curve) in table.summaries.iter().zip(&table.mse) {
        let name = s.estimator.name();
        rows.extend(table.theta.iter().zip(curve).map(|(&t, &r)| BernoulliRow {
            theta: Some(t),
            mse: Some(r),
            ..blank("curve", name)
        }));
    }
    for s in &table.summaries {
        rows.push(BernoulliRow {
            average_risk: Some(s.average_risk),
            average_risk_trapezoid: Some(s.average_risk_trapezoid),
            max_risk: Some(s.max_risk),
            argmax: Some(s.argmax),
            ..blank("summary", s.estimator.name())
        });
    }
    Ok(single(config, render(&config.header_lines(), &rows, config.format)?, true))
}

/// Writes artifacts to their paths, or concatenated to stdout.
pub fn write_output(output: &CommandOutput) -> Result<()> {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for a in &output.artifacts {
        match &a.path {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                fs::write(path, &a.contents).with_context(|| format!("writing {}", path.display()))?;
            }
            None => match lock.write_all(a.contents.as_bytes()) {
                // a closed pipe (`subci bounds | head`) is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
                r => r?,
            },
        }
    }
    Ok(())
}
