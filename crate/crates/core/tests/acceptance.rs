//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p prefq-core --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bfs_steps, enumerated_evoi, max_inside_witness, naive_posterior, Answer};
use prefq_core::belief::{
    posterior_from_history, response_probability, ActionPair, Choice, QSource, QueryRecord,
    ResponseModel, TaskBelief, TaskId,
};
use prefq_core::evoi::evoi_of_pair;
use prefq_core::exec::Execution;
use prefq_core::gridworld::{self, maps, Direction, GridState, GridTask, SolverParams};
use prefq_core::harness::{
    compare_frontiers, log_points, run_episode, sweep_pareto, write_results, write_traces,
    EpisodeConfig, EpisodeRecord, GridEnv, Method, MethodKind, PointGoalEnv, SweepConfig,
    SweepRow,
};
use prefq_core::pointgoal::{self, PgParams, Point};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    if elapsed <= limit {
        Ok(String::new())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:.0?}"))
    }
}

/// Random table of values indexed `[state][action][task]`.
struct Table {
    values: Vec<Vec<Vec<f64>>>,
}

impl QSource for Table {
    type State = usize;
    type Action = usize;

    fn num_tasks(&self) -> usize {
        self.values[0][0].len()
    }

    fn q(&self, state: &usize, action: &usize, task: TaskId) -> f64 {
        self.values[*state][*action][task.0]
    }

    fn greedy(&self, state: &usize, task: TaskId) -> usize {
        let row = &self.values[*state];
        (0..row.len())
            .max_by(|&a, &b| row[a][task.0].total_cmp(&row[b][task.0]))
            .unwrap()
    }
}

const STATES: usize = 3;
const ACTIONS: usize = 4;
const BETAS: [f64; 3] = [0.1, 1.0, 10.0];

struct Instance {
    table: Table,
    prior: Vec<f64>,
    history: Vec<QueryRecord<usize, usize>>,
    beta: f64,
}

/// Every combination of task count 1..=5, history length 0..=4, and
/// precision, `per_cell` random draws each.
fn instances(per_cell: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for n in 1..=5 {
        for len in 0..=4 {
            for beta in BETAS {
                for _ in 0..per_cell {
                    let values = (0..STATES)
                        .map(|_| {
                            (0..ACTIONS)
                                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                                .collect()
                        })
                        .collect();
                    let prior: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
                    let history = (0..len)
                        .map(|_| {
                            let a = rng.random_range(0..ACTIONS);
                            let b = (a + rng.random_range(1..ACTIONS)) % ACTIONS;
                            QueryRecord {
                                state: rng.random_range(0..STATES),
                                pair: ActionPair::new(a, b).unwrap(),
                                chosen: if rng.random::<bool>() { Choice::First } else { Choice::Second },
                            }
                        })
                        .collect();
                    out.push(Instance {
                        table: Table { values },
                        prior,
                        history,
                        beta,
                    });
                }
            }
        }
    }
    out
}

fn oracle_posterior(inst: &Instance) -> Vec<f64> {
    let total: f64 = inst.prior.iter().sum();
    let prior: Vec<f64> = inst.prior.iter().map(|p| p / total).collect();
    let answers: Vec<Answer> = inst
        .history
        .iter()
        .map(|r| Answer {
            chosen: inst.table.values[r.state][*r.chosen_action()].clone(),
            rejected: inst.table.values[r.state][*r.rejected_action()].clone(),
        })
        .collect();
    naive_posterior(&prior, &answers, inst.beta)
}

fn p1_response_model() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let zero = ResponseModel::new(0.0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let beta = rng.random_range(0.0..50.0);
        let model = ResponseModel::new(beta).unwrap();
        let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let sum = response_probability(a, b, &model) + response_probability(b, a, &model);
        worst = worst.max((sum - 1.0).abs());
        ensure!(response_probability(a, b, &zero) == 0.5, "beta 0 gave {}", response_probability(a, b, &zero));
        // Raising the chosen action's value never lowers its probability.
        let bump = rng.random_range(0.0..2.0);
        let lo = response_probability(a, b, &model);
        let hi = response_probability(a + bump, b, &model);
        ensure!(hi >= lo, "not monotone: beta {beta}, {a} vs {b}, bump {bump}");
        if beta > 0.0 && bump > 1e-3 && (a - b).abs() < 1.0 {
            ensure!(hi > lo, "not strictly monotone in the unsaturated range");
        }
    }
    ensure!(worst <= 1e-12, "complementarity error {worst:e}");
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("max |H(a,b)+H(b,a)-1| = {worst:.1e}"))
}

fn p2_posterior() -> Outcome {
    let start = Instant::now();
    let family = instances(40, 2);
    let mut worst: f64 = 0.0;
    let mut worst_inc: f64 = 0.0;
    for inst in &family {
        let model = ResponseModel::new(inst.beta).unwrap();
        let prior = TaskBelief::from_weights(&inst.prior).unwrap();
        let batch = posterior_from_history(&prior, &inst.history, &inst.table, &model).unwrap();
        let oracle = oracle_posterior(inst);
        for (a, b) in batch.weights().iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
        let mut inc = prior.clone();
        for r in &inst.history {
            inc = inc.condition(r, &inst.table, &model).unwrap();
        }
        for (a, b) in inc.weights().iter().zip(batch.weights()) {
            worst_inc = worst_inc.max((a - b).abs());
        }
    }
    ensure!(worst <= 1e-9, "posterior differs from enumeration by {worst:e}");
    ensure!(worst_inc <= 1e-12, "incremental differs from batch by {worst_inc:e}");
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{} instances, max error {worst:.1e}, incremental vs batch {worst_inc:.1e}",
        family.len()
    ))
}

fn p3_evoi() -> Outcome {
    let start = Instant::now();
    let candidates: Vec<usize> = (0..ACTIONS).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut witness: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let values: Vec<Vec<f64>> = (0..ACTIONS)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let beta = BETAS[rng.random_range(0..3)];
        witness = witness.max(max_inside_witness(&w, &values, 0, 1, beta).abs());
    }
    ensure!(witness <= 1e-9, "max-inside expression is {witness:e}, expected 0");

    let family = instances(20, 4);
    let (mut worst, mut min_evoi, mut asym): (f64, f64, f64) = (0.0, f64::INFINITY, 0.0);
    let mut pairs = 0;
    for inst in &family {
        let model = ResponseModel::new(inst.beta).unwrap();
        let prior = TaskBelief::from_weights(&inst.prior).unwrap();
        let belief = posterior_from_history(&prior, &inst.history, &inst.table, &model).unwrap();
        let oracle_w = oracle_posterior(inst);
        for s in 0..STATES {
            let values = &inst.table.values[s];
            for a in 0..ACTIONS {
                for b in 0..ACTIONS {
                    let Some(pair) = ActionPair::new(a, b) else { continue };
                    let e = evoi_of_pair(&belief, &s, &pair, &inst.table, &model, &candidates);
                    let o = enumerated_evoi(&oracle_w, values, a, b, inst.beta);
                    worst = worst.max((e - o).abs());
                    min_evoi = min_evoi.min(e);
                    let swapped = evoi_of_pair(&belief, &s, &pair.clone().swapped(), &inst.table, &model, &candidates);
                    asym = asym.max((e - swapped).abs());
                    pairs += 1;
                }
            }
            for t in 0..inst.prior.len() {
                let point = TaskBelief::point_mass(inst.prior.len(), TaskId(t)).unwrap();
                let pair = ActionPair::new(0, 1).unwrap();
                let e = evoi_of_pair(&point, &s, &pair, &inst.table, &model, &candidates);
                ensure!(e == 0.0, "point-mass belief has value of information {e:e}");
            }
        }
    }
    ensure!(worst <= 1e-9, "differs from enumeration by {worst:e}");
    ensure!(min_evoi >= -1e-10, "negative value of information {min_evoi:e}");
    ensure!(asym <= 1e-12, "order dependence {asym:e}");
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "max-inside witness {witness:.1e}; {pairs} pairs, max error {worst:.1e}, min {min_evoi:.1e}, asymmetry {asym:.1e}"
    ))
}

fn p4_value_iteration() -> Outcome {
    let start = Instant::now();
    let params = SolverParams::default();
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    for name in maps::NAMES {
        let map = maps::load(name).unwrap();
        let table = gridworld::value_iteration(&map, &params);
        for (gi, &goal) in table.goals().iter().enumerate() {
            let dist = bfs_steps(&map, goal);
            let task = GridTask { goal };
            for pos in map.valid_goals().into_iter().chain([map.start()]) {
                if pos == goal {
                    continue;
                }
                for dir in Direction::ALL {
                    let best = table.greedy(gi, pos, dir).1;
                    let Some(d) = dist[pos.row][pos.col][dir.index()] else {
                        ensure!(best == 0.0, "{name}: unreachable pose has value {best}");
                        continue;
                    };
                    let expected = params.gamma.powi(d as i32 - 1);
                    worst = worst.max((best - expected).abs());
                    let mut s = GridState { pos, dir, t: 0 };
                    let mut steps = 0;
                    loop {
                        let (a, _) = table.greedy(gi, s.pos, s.dir);
                        let tr = gridworld::step(&map, &s, a, &task, &params);
                        steps += 1;
                        s = tr.next;
                        if tr.done {
                            ensure!(tr.reached_goal, "{name}: rollout from {pos} {dir:?} to {goal} failed");
                            break;
                        }
                    }
                    ensure!(steps == d, "{name}: rollout from {pos} {dir:?} to {goal} took {steps}, shortest {d}");
                    checked += 1;
                }
            }
        }
    }
    ensure!(worst <= 1e-9, "max_a Q differs from gamma^(d-1) by {worst:e}");
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{checked} (pose, goal) rollouts, max value error {worst:.1e}"))
}

fn template() -> EpisodeConfig {
    EpisodeConfig::new(Method::Evoi { threshold: 0.0 }, 0)
}

fn sweep_rows<W: prefq_core::harness::World>(
    world: &W,
    kind: MethodKind,
    params: Vec<f64>,
    episodes: usize,
) -> Vec<SweepRow> {
    let sweep = SweepConfig::new(params, episodes, 10_000).unwrap();
    sweep_pareto(world, kind, &template(), &sweep, Execution::default())
        .unwrap()
        .rows
}

fn describe(rows: &[SweepRow]) -> String {
    rows.iter()
        .map(|r| format!("({:.2}, {:.3})", r.mean_queries, r.mean_score))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whether some point of `b` is not matched by a point of `a` with no more
/// queries and at least the same score.
fn has_undominated_point(a: &[SweepRow], b: &[SweepRow]) -> bool {
    b.iter().any(|rb| {
        !a.iter()
            .any(|ra| ra.mean_queries <= rb.mean_queries && ra.mean_score >= rb.mean_score)
    })
}

fn p5_pareto() -> Outcome {
    let world = GridEnv::shipped("empty").unwrap();
    let episodes = 200;
    let evoi = sweep_rows(&world, MethodKind::Evoi, log_points(1e-4, 1e-1, 10).unwrap(), episodes);
    let random = sweep_rows(&world, MethodKind::Random, log_points(0.05, 0.5, 10).unwrap(), episodes);
    let unc = sweep_rows(&world, MethodKind::Uncertainty, log_points(1e-4, 1e1, 10).unwrap(), episodes);
    let detail = format!(
        "evoi [{}] random [{}] uncertainty [{}]",
        describe(&evoi),
        describe(&random),
        describe(&unc)
    );
    let mut shared = 0;
    for (name, other) in [("random", &random), ("uncertainty", &unc)] {
        for c in compare_frontiers(&evoi, other) {
            shared += 1;
            ensure!(
                c.holds(),
                "evoi below {name} at {} queries: {:.3} < {:.3} - {:.3}; {detail}",
                c.bin,
                c.challenger,
                c.incumbent,
                c.incumbent_se
            );
        }
    }
    ensure!(
        has_undominated_point(&unc, &random),
        "uncertainty frontier dominates random; {detail}"
    );
    Ok(format!("{shared} shared query bins; {detail}"))
}

fn p6_threshold_anchor() -> Outcome {
    let grid: Vec<f64> = log_points(1e-4, 1e-1, 10)
        .unwrap()
        .into_iter()
        .filter(|&c| c <= 0.0012)
        .chain([0.0012])
        .collect();
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for name in maps::NAMES {
        let world = GridEnv::shipped(name).unwrap();
        for row in sweep_rows(&world, MethodKind::Evoi, grid.clone(), 200) {
            let line = format!(
                "{name} c={:.2e}: {:.2} queries, score {:.3}",
                row.param, row.mean_queries, row.mean_score
            );
            if !(3.0..=15.0).contains(&row.mean_queries) || !(0.4..=1.0).contains(&row.mean_score) {
                failures.push(line.clone());
            }
            summary.push(line);
        }
    }
    ensure!(failures.is_empty(), "outside [3, 15] queries x [0.4, 1] score: {}", failures.join("; "));
    Ok(summary.join("; "))
}

/// Discounted return of heading straight for the goal at full speed,
/// starting with the move `first`.
fn rollout(params: &PgParams, state: Point, first: Point, goal: Point) -> f64 {
    let clamp = |p: Point| {
        Point::new(
            p.x.clamp(params.arena.min.x, params.arena.max.x),
            p.y.clamp(params.arena.min.y, params.arena.max.y),
        )
    };
    let norm = first.x.hypot(first.y);
    let first = if norm > params.a_max { first.scale(params.a_max / norm) } else { first };
    let mut s = clamp(Point::new(state.x + first.x, state.y + first.y));
    let mut total = -((s.x - goal.x).hypot(s.y - goal.y));
    let mut discount = params.gamma;
    for _ in 0..1000 {
        let (dx, dy) = (goal.x - s.x, goal.y - s.y);
        let d = dx.hypot(dy);
        if d < 1e-12 {
            break;
        }
        let k = (params.a_max / d).min(1.0);
        s = Point::new(s.x + dx * k, s.y + dy * k);
        total -= discount * (goal.x - s.x).hypot(goal.y - s.y);
        discount *= params.gamma;
    }
    total
}

fn p7_continuous() -> Outcome {
    let params = PgParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let s = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let g = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let a = Point::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
        let q = pointgoal::q_value(s, a, g, &params);
        worst = worst.max((q - rollout(&params, s, a, g)).abs());
        let v = pointgoal::value(s.distance(g), &params);
        let toward = pointgoal::policy(s, g, &params);
        worst = worst.max((v - rollout(&params, s, toward, g)).abs());
    }
    ensure!(worst <= 1e-6, "analytic values differ from rollouts by {worst:e}");

    let world = PointGoalEnv::grid(params, 4).unwrap();
    let episodes = 500;
    let evoi = sweep_rows(&world, MethodKind::Evoi, log_points(1e-3, 1.0, 8).unwrap(), episodes);
    let mut random_grid = vec![0.0];
    random_grid.extend(log_points(0.01, 1.0, 12).unwrap());
    let random = sweep_rows(&world, MethodKind::Random, random_grid, episodes);
    let detail = format!("evoi [{}] random [{}]", describe(&evoi), describe(&random));
    let mut matched = 0;
    let mut matched_with_queries = 0;
    for e in &evoi {
        let nearest = random
            .iter()
            .min_by(|a, b| {
                (a.mean_queries - e.mean_queries)
                    .abs()
                    .total_cmp(&(b.mean_queries - e.mean_queries).abs())
            })
            .unwrap();
        if (nearest.mean_queries - e.mean_queries).abs() > 0.5 {
            continue;
        }
        matched += 1;
        if e.mean_queries > 0.0 {
            matched_with_queries += 1;
        }
        ensure!(
            e.mean_score >= nearest.mean_score,
            "evoi c={} scores {:.3} at {:.2} queries, random p={} scores {:.3} at {:.2}; {detail}",
            e.param,
            e.mean_score,
            e.mean_queries,
            nearest.param,
            nearest.mean_score,
            nearest.mean_queries
        );
    }
    ensure!(matched_with_queries > 0, "no matched operating points; {detail}");
    Ok(format!(
        "rollout error {worst:.1e}; {matched} matched points, EVOI never below random; {detail}"
    ))
}

fn p8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let world = GridEnv::shipped("maze").unwrap();
    let point = PointGoalEnv::grid(PgParams::default(), 4).unwrap();
    let run = |tag: &str, exec: Execution| -> Result<Vec<u8>, String> {
        let mut records: Vec<EpisodeRecord> = Vec::new();
        for (kind, params) in [
            (MethodKind::Evoi, vec![1e-4, 1e-3]),
            (MethodKind::Random, vec![0.1, 0.3]),
            (MethodKind::Uncertainty, vec![1e-3, 1e-2]),
        ] {
            let sweep = SweepConfig::new(params.clone(), 30, 77).unwrap();
            let mut t = template();
            t.expert = prefq_core::expert::ExpertMode::Stochastic;
            records.extend(sweep_pareto(&world, kind, &t, &sweep, exec).map_err(|e| e.to_string())?.records);
            records.extend(sweep_pareto(&point, kind, &t, &sweep, exec).map_err(|e| e.to_string())?.records);
        }
        let path = dir.path().join(format!("{tag}.csv"));
        write_results(&path, &records).map_err(|e| e.to_string())?;
        let mut bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        bytes.extend(std::fs::read(dir.path().join(format!("{tag}.agg.csv"))).map_err(|e| e.to_string())?);
        let cfg = EpisodeConfig::new(Method::Random { p_query: 0.4 }, 5);
        let r = run_episode(&point, &cfg).map_err(|e| e.to_string())?;
        let rec = EpisodeRecord::new(MethodKind::Random, 0.4, 5, &r);
        write_traces(&mut bytes, &[(rec, r.trace)]).map_err(|e| e.to_string())?;
        Ok(bytes)
    };
    let a = run("a", Execution::Parallel)?;
    let b = run("b", Execution::Parallel)?;
    let c = run("c", Execution::Sequential)?;
    ensure!(a == b, "re-run produced different bytes");
    ensure!(a == c, "sequential run produced different bytes");
    Ok(format!("{} bytes identical across three runs", a.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("P1", "response model identities", p1_response_model),
        ("P2", "posterior matches enumeration", p2_posterior),
        ("P3", "value of information matches enumeration", p3_evoi),
        ("P4", "value iteration matches shortest paths", p4_value_iteration),
        ("P5", "Pareto frontier on Empty", p5_pareto),
        ("P6", "threshold anchor on all maps", p6_threshold_anchor),
        ("P7", "continuous extension", p7_continuous),
        ("P8", "byte-identical reruns", p8_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, title, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS {title} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {title} ({secs:.1}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
