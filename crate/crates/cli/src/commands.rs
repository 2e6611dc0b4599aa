use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use prefq_core::belief::TaskId;
use prefq_core::exec::Execution;
use prefq_core::expert::ExpertMode;
use prefq_core::gridworld::{maps, GridMap, QTable, SolverParams};
use prefq_core::harness::{
    default_step_log, log_grid, run_episode, sweep_pareto, write_results, EpisodeConfig,
    EpisodeResult, GridEnv, MethodKind, PointGoalEnv, SweepConfig, SweepOutput, World,
    DEFAULT_PAIR_SAMPLES,
};
use prefq_core::pointgoal::PgParams;
use prefq_session::{ManagerOptions, SessionManager};
use serde::Serialize;

use crate::args::{Cli, Command, EpisodeArgs, FileConfig, Layer, ServeArgs, SolveArgs, SweepArgs};
use crate::CliError;

const POINTGOAL: &str = "pointgoal";
const DEFAULT_ENV: &str = "empty";
const DEFAULT_POINT_GOALS: usize = 4;
const DEFAULT_EPISODES: usize = 100;
const DEFAULT_PORT: u16 = 8080;

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cache_dir = cli.cache_dir.or(file.cache_dir);
    let cache = cache_dir.as_deref();
    match cli.command {
        Command::Solve(a) => solve(a.or(file.solve), cache),
        Command::Episode(a) => episode(a.or(file.episode), cache),
        Command::Sweep(a) => sweep(a.or(file.sweep), cache),
        Command::Serve(a) => serve(a.or(file.serve), cache_dir),
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// A shipped map by name, or a map file by path.
fn load_map(name_or_path: &str) -> Result<(String, GridMap), CliError> {
    if let Some(map) = maps::load(name_or_path) {
        return Ok((name_or_path.to_string(), map));
    }
    let path = Path::new(name_or_path);
    if !path.is_file() {
        return Err(config_err(format!(
            "unknown map {name_or_path:?}; expected one of {:?} or a map file",
            maps::NAMES
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let map = GridMap::parse(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name_or_path.to_string());
    Ok((name, map))
}

fn parse_expert(s: Option<&str>) -> Result<ExpertMode, CliError> {
    match s.unwrap_or("deterministic") {
        "deterministic" => Ok(ExpertMode::Deterministic),
        "stochastic" => Ok(ExpertMode::Stochastic),
        other => Err(config_err(format!(
            "unknown expert {other:?}; expected deterministic or stochastic"
        ))),
    }
}

fn solve(a: SolveArgs, cache_dir: Option<&Path>) -> Result<(), CliError> {
    let name = a.map.ok_or_else(|| config_err("solve needs a map"))?;
    let (_, map) = load_map(&name)?;
    let defaults = SolverParams::default();
    let params = SolverParams {
        gamma: a.gamma.unwrap_or(defaults.gamma),
        horizon: a.horizon.unwrap_or(defaults.horizon),
    };
    params.validate().map_err(CliError::Config)?;
    let out = match a.out {
        Some(p) => p,
        None => cache_dir
            .map(Path::to_path_buf)
            .unwrap_or_default()
            .join(QTable::cache_file_name(&map, &params)),
    };
    if !a.force.unwrap_or(false) && QTable::load(&out, &map, &params).is_ok() {
        println!("{} (up to date)", out.display());
        return Ok(());
    }
    let table = prefq_core::gridworld::value_iteration(&map, &params);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    table
        .save(&out)
        .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    println!(
        "{} ({}x{}, {} goals)",
        out.display(),
        map.height(),
        map.width(),
        table.goals().len()
    );
    Ok(())
}

/// An environment picked by name.
enum Env {
    Grid(GridEnv),
    Point(PointGoalEnv),
}

fn load_env(name: &str, goals: Option<usize>, cache_dir: Option<&Path>) -> Result<Env, CliError> {
    if name == POINTGOAL {
        let n = goals.unwrap_or(DEFAULT_POINT_GOALS);
        return Ok(Env::Point(PointGoalEnv::grid(PgParams::default(), n)?));
    }
    if goals.is_some() {
        return Err(config_err("--goals applies only to pointgoal"));
    }
    let (label, map) = load_map(name)?;
    Ok(Env::Grid(GridEnv::cached(label, map, SolverParams::default(), cache_dir)?))
}

fn method_and_param(method: Option<MethodKind>, param: Option<f64>) -> (MethodKind, f64) {
    let kind = method.unwrap_or(MethodKind::Evoi);
    (kind, param.unwrap_or(kind.default_range().0))
}

#[derive(Serialize)]
struct EpisodeSummary<'a> {
    env: &'a str,
    method: MethodKind,
    param: f64,
    seed: u64,
    true_task: usize,
    score: f64,
    n_queries: usize,
    n_repetitive: usize,
    steps: usize,
    reached_goal: bool,
}

fn episode(a: EpisodeArgs, cache_dir: Option<&Path>) -> Result<(), CliError> {
    let env_name = a.env.as_deref().unwrap_or(DEFAULT_ENV);
    let (kind, param) = method_and_param(a.method, a.param);
    let mut cfg = EpisodeConfig::new(kind.with_param(param), a.seed.unwrap_or(0));
    cfg.beta = a.beta.unwrap_or(cfg.beta);
    cfg.expert = parse_expert(a.expert.as_deref())?;
    cfg.true_task = a.task.map(TaskId);
    cfg.n_samples = a.samples.unwrap_or(DEFAULT_PAIR_SAMPLES);
    let result = match load_env(env_name, a.goals, cache_dir)? {
        Env::Grid(w) => run_episode(&w, &cfg)?,
        Env::Point(w) => run_episode(&w, &cfg)?,
    };
    if let Some(path) = &a.trace {
        write_trace(path, &result)?;
    }
    let summary = EpisodeSummary {
        env: env_name,
        method: kind,
        param,
        seed: cfg.seed,
        true_task: result.true_task.0,
        score: result.score,
        n_queries: result.n_queries,
        n_repetitive: result.n_repetitive,
        steps: result.steps,
        reached_goal: result.reached_goal,
    };
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn write_trace(path: &Path, result: &EpisodeResult) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, &result.trace)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io)
}

fn sweep(a: SweepArgs, cache_dir: Option<&Path>) -> Result<(), CliError> {
    let out = a.out.ok_or_else(|| config_err("sweep needs --out"))?;
    let env_name = a.env.as_deref().unwrap_or(DEFAULT_ENV);
    let kind = a.method.unwrap_or(MethodKind::Evoi);
    let (lo, hi) = kind.default_range();
    let params = log_grid(
        a.grid_start.unwrap_or(lo),
        a.grid_stop.unwrap_or(hi),
        a.grid_step_log.unwrap_or_else(default_step_log),
    )?;
    let sweep = SweepConfig::new(
        params,
        a.episodes.unwrap_or(DEFAULT_EPISODES),
        a.seed_base.unwrap_or(0),
    )?;
    let mut template = EpisodeConfig::new(kind.with_param(0.0), 0);
    template.beta = a.beta.unwrap_or(template.beta);
    template.expert = parse_expert(a.expert.as_deref())?;
    template.n_samples = a.samples.unwrap_or(DEFAULT_PAIR_SAMPLES);
    let exec = if a.sequential.unwrap_or(false) {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let output = match load_env(env_name, a.goals, cache_dir)? {
        Env::Grid(w) => run_sweep(&w, kind, &template, &sweep, exec)?,
        Env::Point(w) => run_sweep(&w, kind, &template, &sweep, exec)?,
    };
    write_results(&out, &output.records)
        .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    println!("param,mean_score,se_score,mean_queries,se_queries");
    for r in &output.rows {
        println!(
            "{},{:.6},{:.6},{:.4},{:.4}",
            r.param, r.mean_score, r.se_score, r.mean_queries, r.se_queries
        );
    }
    Ok(())
}

fn run_sweep<W: World>(
    world: &W,
    kind: MethodKind,
    template: &EpisodeConfig,
    sweep: &SweepConfig,
    exec: Execution,
) -> Result<SweepOutput, CliError> {
    Ok(sweep_pareto(world, kind, template, sweep, exec)?)
}

fn serve(a: ServeArgs, cache_dir: Option<PathBuf>) -> Result<(), CliError> {
    let host: IpAddr = a
        .host
        .as_deref()
        .unwrap_or("127.0.0.1")
        .parse()
        .map_err(|e| config_err(format!("bad --host: {e}")))?;
    let addr = SocketAddr::new(host, a.port.unwrap_or(DEFAULT_PORT));
    let manager = SessionManager::new(ManagerOptions {
        default_map: a.map.unwrap_or_else(|| DEFAULT_ENV.to_string()),
        cache_dir,
        ..ManagerOptions::default()
    })?;
    let manager = Arc::new(manager);
    // Solve the default map before accepting connections.
    manager.world(&manager.options().default_map)?;
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("serving on ws://{addr}/ws");
    runtime
        .block_on(prefq_session::run(addr, manager))
        .map_err(|e| CliError::Io(format!("{addr}: {e}")))
}
