//! Run configuration. Precedence: command-line flags (or their `SUBCI_*`
//! environment variables), then an optional TOML config file, then
//! per-subcommand defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use subci::{Procedure, ProcedureKind};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "subci", version, about = "Confidence procedures for the uniform location model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Bound functions b(u) on a uniform grid, raw and truncated
    Bounds,
    /// Exact and Monte Carlo coverage per procedure and level
    Coverage,
    /// Binned conditional coverage from Monte Carlo
    Profile,
    /// Discretized optimal-bound solvers against their closed forms
    Optimize,
    /// Rescue simulation: success rate and search effort
    Simulate,
    /// Data behind the bound-function figures
    Figures,
    /// Bernoulli estimator risk curves
    Bernoulli,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Coverage => "coverage",
            Command::Profile => "profile",
            Command::Optimize => "optimize",
            Command::Simulate => "simulate",
            Command::Figures => "figures",
            Command::Bernoulli => "bernoulli",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Procedures: SD, NP, UMP, BC, MIN_EFFORT, MIN_COND_WIDTH, `all` or
    /// `classical`; append `:raw` to skip truncation of SD/NP
    #[arg(long, global = true, value_delimiter = ',', env = "SUBCI_KINDS")]
    pub kinds: Option<Vec<String>>,

    /// Alpha values (repeatable or comma separated)
    #[arg(long, global = true, value_delimiter = ',', env = "SUBCI_ALPHA")]
    pub alpha: Option<Vec<f64>>,

    #[arg(long, global = true, env = "SUBCI_THETA")]
    pub theta: Option<f64>,

    /// Half-length K of the support
    #[arg(long = "k", global = true, env = "SUBCI_K")]
    pub k: Option<f64>,

    /// Observations per sample
    #[arg(long, global = true, env = "SUBCI_N")]
    pub n: Option<usize>,

    #[arg(long, global = true, env = "SUBCI_TRIALS")]
    pub trials: Option<u64>,

    #[arg(long, global = true, env = "SUBCI_SEED")]
    pub seed: Option<u64>,

    /// Monte Carlo shards (independent streams of the seed)
    #[arg(long, global = true, env = "SUBCI_SHARDS")]
    pub shards: Option<usize>,

    /// Grid points for bound sampling and Bernoulli curves
    #[arg(long, global = true, env = "SUBCI_GRID")]
    pub grid: Option<usize>,

    /// Solver grid cells
    #[arg(long, global = true, env = "SUBCI_CELLS")]
    pub cells: Option<usize>,

    /// Bins for the conditional coverage profile
    #[arg(long, global = true, env = "SUBCI_BINS")]
    pub bins: Option<usize>,

    /// Output file (a directory for `figures`); stdout when absent
    #[arg(long, global = true, env = "SUBCI_OUT")]
    pub out: Option<PathBuf>,

    /// Extra file for `optimize` solution vectors
    #[arg(long, global = true, env = "SUBCI_SOLUTIONS")]
    pub solutions: Option<PathBuf>,

    #[arg(long, global = true, env = "SUBCI_FORMAT")]
    pub format: Option<Format>,

    /// TOML file with any of the options above
    #[arg(long, global = true, env = "SUBCI_CONFIG")]
    pub config: Option<PathBuf>,
}

/// Config file contents; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kinds: Option<Vec<String>>,
    pub alpha: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub k: Option<f64>,
    pub n: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub shards: Option<usize>,
    pub grid: Option<usize>,
    pub cells: Option<usize>,
    pub bins: Option<usize>,
    pub out: Option<PathBuf>,
    pub solutions: Option<PathBuf>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub kinds: Vec<ProcedureKind>,
    pub alphas: Vec<f64>,
    pub theta: f64,
    pub k: f64,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub shards: usize,
    pub grid: usize,
    pub cells: usize,
    pub bins: usize,
    pub out: Option<PathBuf>,
    pub solutions: Option<PathBuf>,
    pub format: Format,
}

pub fn parse_kinds(tokens: &[String]) -> Result<Vec<ProcedureKind>> {
    let mut kinds = Vec::new();
    for token in tokens {
        let token = token.trim();
        let (name, truncated) = match token.rsplit_once(':') {
            Some((name, "raw")) => (name, false),
            Some((name, "trunc")) => (name, true),
            Some((_, other)) => bail!("unknown kind modifier ':{other}' in '{token}'"),
            None => (token, true),
        };
        let procedures: Vec<Procedure> = match name.to_ascii_lowercase().as_str() {
            "all" => Procedure::ALL.to_vec(),
            "classical" | "all4" => Procedure::CLASSICAL.to_vec(),
            _ => vec![name.parse::<Procedure>()?],
        };
        kinds.extend(procedures.into_iter().map(|p| ProcedureKind::new(p, truncated)));
    }
    if kinds.is_empty() {
        bail!("no procedures selected");
    }
    Ok(kinds)
}

fn kind_token(kind: &ProcedureKind) -> String {
    if kind.procedure.can_be_inadmissible() && !kind.truncated {
        format!("{}:raw", kind.procedure)
    } else {
        kind.procedure.to_string()
    }
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let file = match &cli.opts.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::resolve(cli.command, &cli.opts, &file)
    }

    pub fn resolve(command: Command, opts: &Opts, file: &FileConfig) -> Result<Self> {
        let default_kinds = match command {
            Command::Bounds | Command::Figures => "classical",
            Command::Profile => "MIN_EFFORT",
            _ => "all",
        };
        let default_alphas = match command {
            Command::Bounds | Command::Figures => vec![0.5, 0.25],
            _ => vec![0.25, 0.5],
        };
        let default_grid = match command {
            Command::Bernoulli => 101,
            _ => 401,
        };

        let kinds = opts
            .kinds
            .clone()
            .or_else(|| file.kinds.clone())
            .unwrap_or_else(|| vec![default_kinds.to_string()]);
        let config = RunConfig {
            command,
            kinds: parse_kinds(&kinds)?,
            alphas: opts.alpha.clone().or_else(|| file.alpha.clone()).unwrap_or(default_alphas),
            theta: opts.theta.or(file.theta).unwrap_or(0.0),
            k: opts.k.or(file.k).unwrap_or(1.0),
            n: opts.n.or(file.n).unwrap_or(2),
            trials: opts.trials.or(file.trials).unwrap_or(1_000_000),
            seed: opts.seed.or(file.seed).unwrap_or(1),
            shards: opts.shards.or(file.shards).unwrap_or(subci::analytics::DEFAULT_SHARDS),
            grid: opts.grid.or(file.grid).unwrap_or(default_grid),
            cells: opts.cells.or(file.cells).unwrap_or(2000),
            bins: opts.bins.or(file.bins).unwrap_or(40),
            out: opts.out.clone().or_else(|| file.out.clone()),
            solutions: opts.solutions.clone().or_else(|| file.solutions.clone()),
            format: opts.format.or(file.format).unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            bail!("at least one alpha is required");
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            bail!("alpha must lie in (0, 1), got {a}");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.grid < 2 {
            bail!("grid must be at least 2");
        }
        if self.shards == 0 {
            bail!("shards must be at least 1");
        }
        if self.bins == 0 {
            bail!("bins must be at least 1");
        }
        subci::ModelConfig::new(self.theta, self.k, self.n)?;
        Ok(())
    }

    pub fn model(&self) -> subci::ModelConfig {
        subci::ModelConfig {
            theta: self.theta,
            half_length: self.k,
            n: self.n,
        }
    }

    /// Lines echoed at the top of every output file. The output path is
    /// left out so identical runs to different files are byte-identical.
    pub fn header_lines(&self) -> Vec<String> {
        let alphas: Vec<String> = self.alphas.iter().map(|a| a.to_string()).collect();
        let kinds: Vec<String> = self.kinds.iter().map(kind_token).collect();
        vec![
            format!("subci {} v{}", self.command.name(), env!("CARGO_PKG_VERSION")),
            format!("kinds: {}", kinds.join(",")),
            format!("alpha: {}", alphas.join(",")),
            format!("theta: {}", self.theta),
            format!("k: {}", self.k),
            format!("n: {}", self.n),
            format!("trials: {}", self.trials),
            format!("seed: {}", self.seed),
            format!("shards: {}", self.shards),
            format!("grid: {}", self.grid),
            format!("cells: {}", self.cells),
            format!("bins: {}", self.bins),
            format!("format: {}", self.format),
        ]
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.header_lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
