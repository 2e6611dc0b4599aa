//! Command-line flags and the TOML file that mirrors them.
//!
//! Every flag can also be set in the file passed with `--config`, under a
//! table named after the subcommand, using the flag's long name as the key.
//! Flags and environment variables win over the file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use prefq_core::harness::MethodKind;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "prefq", version, about = "Active preference querying experiments")]
pub struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for cached Q tables.
    #[arg(long, global = true, env = "PREFQ_CACHE_DIR", value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a grid map and store its Q table.
    Solve(SolveArgs),
    /// Run one episode against the simulated expert and print its metrics.
    Episode(EpisodeArgs),
    /// Sweep a method parameter over a log-spaced grid and write CSV results.
    Sweep(SweepArgs),
    /// Serve live sessions over a WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SolveArgs {
    /// Shipped map name or path to a map file.
    pub map: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Output file; defaults to the cache directory.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Solve even if a matching table already exists.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub force: Option<bool>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EpisodeArgs {
    /// Shipped map name, or `pointgoal`.
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<MethodKind>,
    /// Value threshold (evoi), query probability (random), or variance
    /// threshold (uncertainty).
    #[arg(long, allow_negative_numbers = true)]
    pub param: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden task index; drawn with the seed when absent.
    #[arg(long)]
    pub task: Option<usize>,
    /// `deterministic` or `stochastic`.
    #[arg(long)]
    pub expert: Option<String>,
    /// Candidate pairs sampled per decision by sampling methods.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of goals for `pointgoal`.
    #[arg(long)]
    pub goals: Option<usize>,
    /// Also write the per-step trace as JSON.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<MethodKind>,
    #[arg(long)]
    pub grid_start: Option<f64>,
    #[arg(long)]
    pub grid_stop: Option<f64>,
    /// Natural-log spacing between grid points.
    #[arg(long)]
    pub grid_step_log: Option<f64>,
    /// Episodes per grid point.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Episode `i` at every grid point uses seed `seed_base + i`.
    #[arg(long)]
    pub seed_base: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub expert: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub goals: Option<usize>,
    /// Run episodes one at a time on this thread.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
    /// Per-episode CSV; the aggregate goes next to it as `<stem>.agg.csv`.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Map for sessions that do not name one.
    #[arg(long)]
    pub map: Option<String>,
}

fn parse_method(s: &str) -> Result<MethodKind, String> {
    s.parse().map_err(|e: prefq_core::harness::HarnessError| e.to_string())
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub solve: SolveArgs,
    #[serde(default)]
    pub episode: EpisodeArgs,
    #[serde(default)]
    pub sweep: SweepArgs,
    #[serde(default)]
    pub serve: ServeArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Field-wise `Option::or`: values already set win.
pub trait Layer {
    fn or(self, fallback: Self) -> Self;
}

macro_rules! layer {
    ($t:ty { $($f:ident),* $(,)? }) => {
        impl Layer for $t {
            fn or(self, fallback: Self) -> Self {
                Self { $($f: self.$f.or(fallback.$f)),* }
            }
        }
    };
}

layer!(SolveArgs { map, gamma, horizon, out, force });
layer!(EpisodeArgs { env, method, param, beta, seed, task, expert, samples, goals, trace });
layer!(SweepArgs {
    env, method, grid_start, grid_stop, grid_step_log, episodes, seed_base, beta, expert,
    samples, goals, sequential, out,
});
layer!(ServeArgs { host, port, map });
