//! Episode driver, parameter sweeps, and result files.

mod episode;
mod results;
mod sweep;
mod world;

use thiserror::Error;

pub use episode::{
    replay_episode, run_episode, Episode, EpisodeConfig, EpisodeResult, Method, MethodKind, Phase,
    TraceStep, DEFAULT_PAIR_SAMPLES,
};
pub use results::{
    aggregate, aggregate_path, sort_records, write_aggregate, write_records, write_results,
    write_traces,
};
pub use sweep::{
    compare_frontiers, default_step_log, frontier, log_grid, log_points, mean_se, sweep_pareto, BinComparison,
    EpisodeRecord, SweepConfig, SweepOutput, SweepRow,
};
pub use world::{EnvAction, EnvState, GridEnv, PointGoalEnv, Querier, Transition, World};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
