use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    random_decide_continuous, random_decide_discrete, uncertainty_decide_continuous,
    uncertainty_decide_discrete, RandomQuerierConfig, UncertaintyQuerierConfig,
};
use crate::belief::{QSource, ResponseModel, TaskBelief, TaskId};
use crate::evoi::{
    act_continuous, act_discrete, select_query_continuous, select_query_discrete, QuerierConfig,
    QueryDecision,
};
use crate::gridworld::{
    self, maps, GridAction, GridMap, GridQ, GridState, GridTask, Pos, QTable, SolverParams,
};
use crate::pointgoal::{self, PgParams, Point, PointGoalQ, TaskLayout};

use super::HarnessError;

/// Validated per-step querying rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Querier {
    Evoi(QuerierConfig),
    Random(RandomQuerierConfig),
    Uncertainty(UncertaintyQuerierConfig),
}

/// Serializable snapshot of an environment state, for traces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvState {
    Grid(GridState),
    Point(Point),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvAction {
    Grid(GridAction),
    Point(Point),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub next: S,
    pub reward: f64,
    pub terminal: bool,
    pub reached_goal: bool,
}

/// An environment the episode driver can run: dynamics for the true task,
/// a Q source for the agent, and the querier/acting rules that fit its
/// action space.
pub trait World: Sync {
    type Q: QSource;

    fn qsource(&self) -> &Self::Q;

    fn initial_state(&self) -> <Self::Q as QSource>::State;

    fn horizon(&self) -> usize;

    fn transition(
        &self,
        state: &<Self::Q as QSource>::State,
        action: &<Self::Q as QSource>::Action,
        task: TaskId,
    ) -> Transition<<Self::Q as QSource>::State>;

    fn decide<R: Rng + ?Sized>(
        &self,
        querier: &Querier,
        belief: &TaskBelief,
        state: &<Self::Q as QSource>::State,
        model: &ResponseModel,
        rng: &mut R,
    ) -> QueryDecision<<Self::Q as QSource>::Action>;

    fn act(
        &self,
        belief: &TaskBelief,
        state: &<Self::Q as QSource>::State,
    ) -> <Self::Q as QSource>::Action;

    /// Episode score from the per-step rewards.
    fn score(&self, rewards: &[f64], reached_goal: bool) -> f64;

    fn state_repr(&self, state: &<Self::Q as QSource>::State) -> EnvState;

    fn action_repr(&self, action: &<Self::Q as QSource>::Action) -> EnvAction;
}

/// A grid map with its solved Q table; task hypotheses are goal cells.
#[derive(Clone, Debug)]
pub struct GridEnv {
    name: String,
    map: GridMap,
    params: SolverParams,
    q: GridQ,
}

impl GridEnv {
    /// Solves `map` and uses every valid goal as a hypothesis.
    pub fn new(name: impl Into<String>, map: GridMap, params: SolverParams) -> Self {
        let table = Arc::new(gridworld::value_iteration(&map, &params));
        Self::from_table(name, map, table).expect("fresh table matches its map")
    }

    pub fn from_table(
        name: impl Into<String>,
        map: GridMap,
        table: Arc<QTable>,
    ) -> Result<Self, HarnessError> {
        let params = table.params();
        if !table.matches(&map, &params) {
            return Err(HarnessError::Config(
                "Q table was built for a different map".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            map,
            params,
            q: GridQ::new(table),
        })
    }

    pub fn shipped(name: &str) -> Result<Self, HarnessError> {
        let map = maps::load(name)
            .ok_or_else(|| HarnessError::Config(format!("unknown map {name:?}")))?;
        Ok(Self::new(name, map, SolverParams::default()))
    }

    /// Like [`GridEnv::new`], but reuses a Q-table file in `cache_dir` when
    /// one matches `map` and `params`, and writes one after solving.
    /// A failed write is logged, not returned.
    pub fn cached(
        name: impl Into<String>,
        map: GridMap,
        params: SolverParams,
        cache_dir: Option<&Path>,
    ) -> Result<Self, HarnessError> {
        params.validate().map_err(HarnessError::Config)?;
        let Some(dir) = cache_dir else {
            return Ok(Self::new(name, map, params));
        };
        let path = dir.join(QTable::cache_file_name(&map, &params));
        let table = match QTable::load(&path, &map, &params) {
            Ok(t) => t,
            Err(e) => {
                if path.exists() {
                    log::warn!("ignoring cache file {}: {e}", path.display());
                }
                let t = gridworld::value_iteration(&map, &params);
                if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| t.save(&path)) {
                    log::warn!("could not write cache file {}: {e}", path.display());
                }
                t
            }
        };
        Self::from_table(name, map, Arc::new(table))
    }

    /// Restricts the hypotheses to `goals`, in the given order.
    pub fn with_hypotheses(mut self, goals: &[Pos]) -> Result<Self, HarnessError> {
        self.q = GridQ::with_goals(self.q.shared_table(), goals)
            .ok_or_else(|| HarnessError::Config("hypothesis is not a valid goal".into()))?;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn params(&self) -> SolverParams {
        self.params
    }

    pub fn q(&self) -> &GridQ {
        &self.q
    }

    pub fn goal(&self, task: TaskId) -> Pos {
        self.q.goal(task)
    }
}

impl World for GridEnv {
    type Q = GridQ;

    fn qsource(&self) -> &GridQ {
        &self.q
    }

    fn initial_state(&self) -> GridState {
        GridState::initial(&self.map)
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn transition(&self, state: &GridState, action: &GridAction, task: TaskId) -> Transition<GridState> {
        let t = gridworld::step(
            &self.map,
            state,
            *action,
            &GridTask {
                goal: self.q.goal(task),
            },
            &self.params,
        );
        Transition {
            next: t.next,
            reward: t.reward,
            terminal: t.done,
            reached_goal: t.reached_goal,
        }
    }

    fn decide<R: Rng + ?Sized>(
        &self,
        querier: &Querier,
        belief: &TaskBelief,
        state: &GridState,
        model: &ResponseModel,
        rng: &mut R,
    ) -> QueryDecision<GridAction> {
        match querier {
            Querier::Evoi(cfg) => select_query_discrete(belief, state, &self.q, model, cfg),
            Querier::Random(cfg) => random_decide_discrete(belief, state, &self.q, cfg, rng),
            Querier::Uncertainty(cfg) => uncertainty_decide_discrete(belief, state, &self.q, cfg),
        }
    }

    fn act(&self, belief: &TaskBelief, state: &GridState) -> GridAction {
        act_discrete(belief, state, &self.q)
    }

    /// `gamma^(steps - 1)` when the goal is reached, otherwise 0.
    fn score(&self, rewards: &[f64], reached_goal: bool) -> f64 {
        if reached_goal {
            self.params.gamma.powi(rewards.len() as i32 - 1)
        } else {
            0.0
        }
    }

    fn state_repr(&self, state: &GridState) -> EnvState {
        EnvState::Grid(*state)
    }

    fn action_repr(&self, action: &GridAction) -> EnvAction {
        EnvAction::Grid(*action)
    }
}

/// Point-mass goal reaching with a finite set of goal hypotheses.
#[derive(Clone, Debug)]
pub struct PointGoalEnv {
    start: Point,
    q: PointGoalQ,
}

impl PointGoalEnv {
    pub fn new(params: PgParams, goals: Vec<Point>, start: Point) -> Result<Self, HarnessError> {
        params.validate().map_err(HarnessError::Config)?;
        if goals.is_empty() {
            return Err(HarnessError::Config("at least one goal hypothesis is required".into()));
        }
        if !goals.iter().chain([&start]).all(|&p| params.arena.contains(p)) {
            return Err(HarnessError::Config("start and goals must lie in the arena".into()));
        }
        Ok(Self {
            start,
            q: PointGoalQ::new(params, goals),
        })
    }

    /// `n` grid-laid goals with the agent starting at the arena center.
    pub fn grid(params: PgParams, n: usize) -> Result<Self, HarnessError> {
        let goals = pointgoal::tasks(n, &params.arena, TaskLayout::Grid);
        Self::new(params, goals, params.arena.center())
    }

    pub fn params(&self) -> &PgParams {
        self.q.params()
    }

    pub fn goals(&self) -> &[Point] {
        self.q.goals()
    }

    pub fn start(&self) -> Point {
        self.start
    }
}

impl World for PointGoalEnv {
    type Q = PointGoalQ;

    fn qsource(&self) -> &PointGoalQ {
        &self.q
    }

    fn initial_state(&self) -> Point {
        self.start
    }

    fn horizon(&self) -> usize {
        self.q.params().horizon
    }

    fn transition(&self, state: &Point, action: &Point, task: TaskId) -> Transition<Point> {
        let t = pointgoal::step(*state, *action, self.q.goals()[task.0], self.q.params());
        Transition {
            next: t.next,
            reward: t.reward,
            terminal: t.done,
            reached_goal: t.done,
        }
    }

    fn decide<R: Rng + ?Sized>(
        &self,
        querier: &Querier,
        belief: &TaskBelief,
        state: &Point,
        model: &ResponseModel,
        rng: &mut R,
    ) -> QueryDecision<Point> {
        match querier {
            Querier::Evoi(cfg) => select_query_continuous(belief, state, &self.q, model, cfg, rng),
            Querier::Random(cfg) => random_decide_continuous(belief, state, &self.q, cfg, rng),
            Querier::Uncertainty(cfg) => {
                uncertainty_decide_continuous(belief, state, &self.q, model, cfg, rng)
            }
        }
    }

    fn act(&self, belief: &TaskBelief, state: &Point) -> Point {
        act_continuous(belief, state, &self.q)
    }

    /// Discounted return.
    fn score(&self, rewards: &[f64], _reached_goal: bool) -> f64 {
        let gamma = self.q.params().gamma;
        rewards
            .iter()
            .rev()
            .fold(0.0, |acc, &r| r + gamma * acc)
    }

    fn state_repr(&self, state: &Point) -> EnvState {
        EnvState::Point(*state)
    }

    fn action_repr(&self, action: &Point) -> EnvAction {
        EnvAction::Point(*action)
    }
}
