//! Command-line driver: dataset generation, ingestion checks, graph export,
//! edge classification, rolling backtests, and report recomputation.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use netrev::backtest::BacktestError;
use netrev::graph::GraphKind;
use netrev::relation::RelationError;
use netrev::signal::WeightMode;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("output location {path} is not writable")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Panel(#[from] netrev::panel::PanelError),
    #[error(transparent)]
    Graph(#[from] netrev::graph::GraphError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Metrics(#[from] netrev::metrics::MetricsError),
    #[error(transparent)]
    Synth(#[from] netrev::synth::SynthError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
}

fn backtest_hit_budget(err: &BacktestError) -> bool {
    match err {
        BacktestError::InWindow { source, .. } => backtest_hit_budget(source),
        BacktestError::Relation(RelationError::CallBudgetExceeded { .. }) => true,
        _ => false,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Unwritable { .. } => 2,
            CliError::Relation(RelationError::CallBudgetExceeded { .. }) => 3,
            CliError::Backtest(e) if backtest_hit_budget(e) => 3,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "netrev",
    version,
    about = "Text-derived stock networks, relation-filtered pair signals, and long-short backtests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags that override keys of the `[backtest]` config table.
#[derive(Debug, Args, Default)]
pub struct BacktestOverrides {
    /// Override backtest.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override backtest.k (graph neighbors)
    #[arg(long)]
    k: Option<usize>,
    /// Override backtest.graph: semantic | random | industry
    #[arg(long)]
    graph: Option<GraphKind>,
    /// Override backtest.train_len (trading days)
    #[arg(long)]
    train_len: Option<usize>,
    /// Override backtest.test_len (trading days)
    #[arg(long)]
    test_len: Option<usize>,
    /// Override backtest.groups
    #[arg(long)]
    groups: Option<usize>,
    /// Override backtest.weighting: softmax | equal
    #[arg(long)]
    weighting: Option<String>,
    /// Override backtest.filtering: true | false
    #[arg(long)]
    filtering: Option<bool>,
    /// Override output.dir
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BacktestOverrides {
    fn apply(&self, config: &mut RunConfig) -> Result<(), CliError> {
        let b = &mut config.backtest;
        if let Some(seed) = self.seed {
            b.seed = seed;
        }
        if let Some(k) = self.k {
            b.k = k;
        }
        if let Some(graph) = self.graph {
            b.graph = graph;
        }
        if let Some(train_len) = self.train_len {
            b.train_len = train_len;
        }
        if let Some(test_len) = self.test_len {
            b.test_len = test_len;
        }
        if let Some(groups) = self.groups {
            b.groups = groups;
        }
        if let Some(weighting) = &self.weighting {
            b.weighting = match weighting.as_str() {
                "softmax" => WeightMode::Softmax,
                "equal" => WeightMode::Equal,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown weighting `{other}` (expected softmax | equal)"
                    )))
                }
            };
        }
        if let Some(filtering) = self.filtering {
            b.filtering = filtering;
        }
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        b.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled market in the ingestion file formats.
    Synth {
        /// TOML file with the generator parameters.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory (replaced atomically if it exists).
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and validate every configured input, then print a summary.
    IngestCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build the candidate graph for one window and export `edges.csv`.
    BuildGraph {
        #[arg(long)]
        config: PathBuf,
        /// Rolling-window index (0-based).
        #[arg(long, default_value_t = 0)]
        window: usize,
        /// Output file (default: `<output.dir>/edges_w<window>.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify candidate edges across all windows, warming the cache.
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the rolling-window backtest and write the results directory.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Run the five ablation variants instead of a single configuration.
        #[arg(long)]
        sweep: bool,
        #[command(flatten)]
        overrides: BacktestOverrides,
    },
    /// Recompute performance statistics from an existing results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Optional `factors.csv` for the factor regression.
        #[arg(long)]
        factors: Option<PathBuf>,
    },
}

fn render_chain(err: &dyn std::error::Error) -> String {
    let mut out = err.to_string();
    let mut source = err.source();
    while let Some(inner) = source {
        out.push_str(": ");
        out.push_str(&inner.to_string());
        source = inner.source();
    }
    out
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { spec, out } => commands::synth::run(&spec, &out),
        Command::IngestCheck { config } => {
            let config = RunConfig::load(&config)?;
            commands::ingest::run(&config)
        }
        Command::BuildGraph {
            config,
            window,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            commands::build_graph::run(&config, window, out.as_deref())
        }
        Command::Classify { config } => {
            let config = RunConfig::load(&config)?;
            commands::classify::run(&config)
        }
        Command::Backtest {
            config,
            sweep,
            overrides,
        } => {
            let mut config = RunConfig::load(&config)?;
            overrides.apply(&mut config)?;
            if sweep {
                commands::backtest::run_sweep(&config)
            } else {
                commands::backtest::run_single(&config)
            }
        }
        Command::Report { results, factors } => {
            commands::report::run(&results, factors.as_deref())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {}", render_chain(&err));
        std::process::exit(err.exit_code());
    }
}
