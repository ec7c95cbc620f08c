//! Command-line arguments. The same structs are read from scenario files,
//! where relative paths are resolved against the scenario's directory.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ipir_core::Solver;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "ipir", version, about = "Intermittent private information retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum-cost policy for a joint distribution by linear programming.
    SolveLp(SolveLpArgs),
    /// Constructive policy for a conditional matrix.
    Greedy(GreedyArgs),
    /// Simulate private request S followed by non-private request X.
    TwoRequest(TwoRequestArgs),
    /// Run the location mechanism over a sampled trace.
    SimulateLocation(LocationArgs),
    /// Audit a two-request transcript.
    Audit(AuditArgs),
    /// Serve a store file over TCP.
    Serve(ServeArgs),
    /// Write a random store file.
    Upload(UploadArgs),
    /// Pretty-print a JSON report.
    Report(ReportArgs),
    /// Run a scenario file.
    Run(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    #[default]
    Auto,
    Lp,
    Greedy,
}

impl SolverChoice {
    pub fn resolve(self, k: usize) -> Solver {
        match self {
            SolverChoice::Auto => Solver::auto(k),
            SolverChoice::Lp => Solver::Lp,
            SolverChoice::Greedy => Solver::Greedy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    /// Enumerate when feasible, otherwise sample.
    #[default]
    Exact,
    /// Use the observed transcript.
    Empirical,
    None,
}

fn default_servers() -> usize {
    2
}

fn default_trials() -> u64 {
    100_000
}

fn default_timeout() -> u64 {
    10_000
}

fn default_threshold() -> f64 {
    ipir_core::audit::DEFAULT_TV_THRESHOLD
}

fn rebase(dir: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = dir.join(&*path);
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SolveLpArgs {
    #[arg(long)]
    pub joint: PathBuf,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_servers")]
    pub servers: usize,
    #[arg(long)]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GreedyArgs {
    #[arg(long)]
    pub cond: PathBuf,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_servers")]
    pub servers: usize,
    #[arg(long)]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Where the servers are: in this process over a store, or remote.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct TransportArgs {
    /// Store file. Without it a random store is drawn from the seed.
    #[arg(long)]
    #[serde(default)]
    pub store: Option<PathBuf>,
    /// Message length L; defaults to the store's, else N^K.
    #[arg(long)]
    #[serde(default)]
    pub length: Option<usize>,
    /// Comma-separated server endpoints, one per server.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub remote: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TwoRequestArgs {
    #[arg(long)]
    pub joint: PathBuf,
    #[arg(long, conflicts_with_all = ["auto_lp", "auto_greedy"])]
    #[serde(default)]
    pub policy: Option<PathBuf>,
    #[arg(long, conflicts_with = "auto_greedy")]
    #[serde(default)]
    pub auto_lp: bool,
    #[arg(long)]
    #[serde(default)]
    pub auto_greedy: bool,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_servers")]
    pub servers: usize,
    #[arg(long, default_value_t = 100_000)]
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = AuditMode::Exact)]
    #[serde(default)]
    pub audit: AuditMode,
    /// Write the per-trial queries here for `ipir audit`.
    #[arg(long)]
    #[serde(default)]
    pub transcript: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub transport: TransportArgs,
    #[arg(long)]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct LocationArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_servers")]
    pub servers: usize,
    /// Last instant T; instants run 0..=T.
    #[arg(long)]
    #[serde(default)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SolverChoice::Auto)]
    #[serde(default)]
    pub solver: SolverChoice,
    /// Leave the true locations out of the report.
    #[arg(long)]
    #[serde(default)]
    pub redact: bool,
    /// Also check every history exhaustively (small instances only).
    #[arg(long)]
    #[serde(default)]
    pub verify: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub transport: TransportArgs,
    #[arg(long)]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct AuditArgs {
    #[arg(long)]
    pub transcript: PathBuf,
    #[arg(long, conflicts_with = "empirical")]
    #[serde(default)]
    pub exact: bool,
    #[arg(long)]
    #[serde(default)]
    pub empirical: bool,
    /// Total-variation threshold for the empirical audit.
    #[arg(long, default_value_t = ipir_core::audit::DEFAULT_TV_THRESHOLD)]
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[arg(long)]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7400")]
    pub listen: String,
}

#[derive(Clone, Debug, Args)]
pub struct UploadArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub messages: usize,
    /// Bits per message, a multiple of 8.
    #[arg(long)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args)]
pub struct ReportArgs {
    pub file: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    /// Overrides the scenario's output path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// A scenario file: one of the report-producing subcommands and its
/// arguments, e.g. `{"mode": "two-request", "joint": "pair_joint.json"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Scenario {
    SolveLp(SolveLpArgs),
    Greedy(GreedyArgs),
    TwoRequest(TwoRequestArgs),
    Location(LocationArgs),
    Audit(AuditArgs),
    Serve(ServeArgs),
}

impl Scenario {
    pub fn rebase(&mut self, dir: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        match self {
            Scenario::SolveLp(a) => {
                join(&mut a.joint);
                rebase(dir, &mut a.output);
            }
            Scenario::Greedy(a) => {
                join(&mut a.cond);
                rebase(dir, &mut a.output);
            }
            Scenario::TwoRequest(a) => {
                join(&mut a.joint);
                rebase(dir, &mut a.policy);
                rebase(dir, &mut a.transcript);
                rebase(dir, &mut a.transport.store);
                rebase(dir, &mut a.output);
            }
            Scenario::Location(a) => {
                join(&mut a.model);
                join(&mut a.schedule);
                rebase(dir, &mut a.transport.store);
                rebase(dir, &mut a.output);
            }
            Scenario::Audit(a) => {
                join(&mut a.transcript);
                rebase(dir, &mut a.output);
            }
            Scenario::Serve(a) => join(&mut a.store),
        }
    }

    pub fn set_output(&mut self, output: PathBuf) {
        match self {
            Scenario::SolveLp(a) => a.output = Some(output),
            Scenario::Greedy(a) => a.output = Some(output),
            Scenario::TwoRequest(a) => a.output = Some(output),
            Scenario::Location(a) => a.output = Some(output),
            Scenario::Audit(a) => a.output = Some(output),
            Scenario::Serve(_) => {}
        }
    }
}
