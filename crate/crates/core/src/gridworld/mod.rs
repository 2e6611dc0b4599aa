//! Oriented-agent grid worlds and their exact goal-conditioned Q tables.
//!
//! The agent turns left, turns right, or moves forward. Walls and the border
//! block movement, stepping into lava ends the episode with nothing, and
//! stepping onto the goal ends it with reward 1.

mod cache;
mod map;
pub mod maps;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::{DiscreteActions, QSource, TaskId};
use crate::exec::{map_indexed, Execution};

pub use cache::CacheError;
pub use map::{Cell, Direction, GridMap, MapError, Pos};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GridAction {
    TurnLeft,
    TurnRight,
    Forward,
}

impl GridAction {
    pub const ALL: [GridAction; 3] = [
        GridAction::TurnLeft,
        GridAction::TurnRight,
        GridAction::Forward,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            GridAction::TurnLeft => "turn left",
            GridAction::TurnRight => "turn right",
            GridAction::Forward => "move forward",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub pos: Pos,
    pub dir: Direction,
    pub t: usize,
}

impl GridState {
    pub fn initial(map: &GridMap) -> Self {
        Self {
            pos: map.start(),
            dir: map.start_dir(),
            t: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridTask {
    pub goal: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub gamma: f64,
    pub horizon: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            horizon: 50,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if self.horizon == 0 {
            return Err("horizon must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridTransition {
    pub next: GridState,
    pub reward: f64,
    pub done: bool,
    pub reached_goal: bool,
}

/// Pose change for one action, ignoring time. Returns the new pose, the
/// reward, and whether the move ended the episode.
pub(crate) fn transition(
    map: &GridMap,
    pos: Pos,
    dir: Direction,
    action: GridAction,
    goal: Pos,
) -> (Pos, Direction, f64, bool) {
    match action {
        GridAction::TurnLeft => (pos, dir.left(), 0.0, false),
        GridAction::TurnRight => (pos, dir.right(), 0.0, false),
        GridAction::Forward => match map.neighbor(pos, dir) {
            None => (pos, dir, 0.0, false),
            Some(target) if target == goal => (target, dir, 1.0, true),
            Some(target) => match map.cell(target) {
                Cell::Wall => (pos, dir, 0.0, false),
                Cell::Lava => (target, dir, 0.0, true),
                Cell::Empty => (target, dir, 0.0, false),
            },
        },
    }
}

/// Advances the environment by one action toward `task`.
pub fn step(
    map: &GridMap,
    state: &GridState,
    action: GridAction,
    task: &GridTask,
    params: &SolverParams,
) -> GridTransition {
    let (pos, dir, reward, terminal) = transition(map, state.pos, state.dir, action, task.goal);
    let t = state.t + 1;
    GridTransition {
        next: GridState { pos, dir, t },
        reward,
        done: terminal || t >= params.horizon,
        reached_goal: reward > 0.0,
    }
}

pub fn valid_goals(map: &GridMap) -> Vec<GridTask> {
    map.valid_goals()
        .into_iter()
        .map(|goal| GridTask { goal })
        .collect()
}

/// Dense `Q(pose, action; goal)` for every valid goal of one map.
///
/// Entries are the `horizon`-step finite-horizon optimal values, used as a
/// stationary table. Poses on the goal itself, on walls and on lava are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    pub(crate) height: usize,
    pub(crate) width: usize,
    pub(crate) params: SolverParams,
    pub(crate) map_hash: [u8; 32],
    pub(crate) goals: Vec<Pos>,
    pub(crate) values: Vec<f64>,
}

const N_ACTIONS: usize = 3;
const N_DIRS: usize = 4;

impl QTable {
    fn per_goal(&self) -> usize {
        self.height * self.width * N_DIRS * N_ACTIONS
    }

    fn offset(&self, goal: usize, pos: Pos, dir: Direction) -> usize {
        goal * self.per_goal() + ((pos.row * self.width + pos.col) * N_DIRS + dir.index()) * N_ACTIONS
    }

    pub fn goals(&self) -> &[Pos] {
        &self.goals
    }

    pub fn params(&self) -> SolverParams {
        self.params
    }

    pub fn goal_index(&self, goal: Pos) -> Option<usize> {
        self.goals.iter().position(|&g| g == goal)
    }

    pub fn q(&self, goal: usize, pos: Pos, dir: Direction, action: GridAction) -> f64 {
        self.values[self.offset(goal, pos, dir) + action.index()]
    }

    pub fn action_values(&self, goal: usize, pos: Pos, dir: Direction) -> [f64; 3] {
        let o = self.offset(goal, pos, dir);
        [self.values[o], self.values[o + 1], self.values[o + 2]]
    }

    /// Best action for one goal (earliest action on ties) and its value.
    pub fn greedy(&self, goal: usize, pos: Pos, dir: Direction) -> (GridAction, f64) {
        let v = self.action_values(goal, pos, dir);
        let mut best = 0;
        for a in 1..N_ACTIONS {
            if v[a] > v[best] {
                best = a;
            }
        }
        (GridAction::ALL[best], v[best])
    }

    pub fn matches(&self, map: &GridMap, params: &SolverParams) -> bool {
        self.map_hash == cache::map_hash(map) && self.params == *params
    }
}

/// Solves every goal of `map` by backward induction over `params.horizon`
/// steps.
pub fn value_iteration(map: &GridMap, params: &SolverParams) -> QTable {
    value_iteration_with(map, params, Execution::default())
}

pub fn value_iteration_with(map: &GridMap, params: &SolverParams, exec: Execution) -> QTable {
    let goals = map.valid_goals();
    let blocks = map_indexed(goals.len(), exec, |g| solve_goal(map, params, goals[g]));
    QTable {
        height: map.height(),
        width: map.width(),
        params: *params,
        map_hash: cache::map_hash(map),
        goals,
        values: blocks.concat(),
    }
}

fn solve_goal(map: &GridMap, params: &SolverParams, goal: Pos) -> Vec<f64> {
    let n_states = map.n_cells() * N_DIRS;
    // Successor of every live (state, action); None where the state is not live.
    let mut successors: Vec<Option<[(usize, f64, bool); N_ACTIONS]>> = vec![None; n_states];
    for cell in 0..map.n_cells() {
        let pos = map.pos_of(cell);
        if pos == goal || map.cell(pos) != Cell::Empty {
            continue;
        }
        for dir in Direction::ALL {
            let mut row = [(0, 0.0, false); N_ACTIONS];
            for action in GridAction::ALL {
                let (p, d, r, done) = transition(map, pos, dir, action, goal);
                row[action.index()] = (map.cell_index(p) * N_DIRS + d.index(), r, done);
            }
            successors[cell * N_DIRS + dir.index()] = Some(row);
        }
    }

    let mut q = vec![0.0; n_states * N_ACTIONS];
    let mut v = vec![0.0; n_states];
    for _ in 0..params.horizon {
        for (s, value) in v.iter_mut().enumerate() {
            let row = &q[s * N_ACTIONS..(s + 1) * N_ACTIONS];
            *value = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        for (s, succ) in successors.iter().enumerate() {
            if let Some(row) = succ {
                for (a, &(next, reward, done)) in row.iter().enumerate() {
                    q[s * N_ACTIONS + a] = if done {
                        reward
                    } else {
                        reward + params.gamma * v[next]
                    };
                }
            }
        }
    }
    q
}

/// [`QSource`] view of a table restricted to a list of goal hypotheses.
#[derive(Clone, Debug)]
pub struct GridQ {
    table: Arc<QTable>,
    hypotheses: Vec<usize>,
}

impl GridQ {
    /// Every goal of the table is a hypothesis, in table order.
    pub fn new(table: Arc<QTable>) -> Self {
        let hypotheses = (0..table.goals.len()).collect();
        Self { table, hypotheses }
    }

    /// Hypotheses are the listed goals; `None` if any is not in the table.
    pub fn with_goals(table: Arc<QTable>, goals: &[Pos]) -> Option<Self> {
        let hypotheses = goals
            .iter()
            .map(|&g| table.goal_index(g))
            .collect::<Option<Vec<_>>>()?;
        Some(Self { table, hypotheses })
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn shared_table(&self) -> Arc<QTable> {
        Arc::clone(&self.table)
    }

    pub fn goal(&self, task: TaskId) -> Pos {
        self.table.goals[self.hypotheses[task.0]]
    }
}

impl QSource for GridQ {
    type State = GridState;
    type Action = GridAction;

    fn num_tasks(&self) -> usize {
        self.hypotheses.len()
    }

    fn q(&self, state: &GridState, action: &GridAction, task: TaskId) -> f64 {
        self.table
            .q(self.hypotheses[task.0], state.pos, state.dir, *action)
    }

    fn greedy(&self, state: &GridState, task: TaskId) -> GridAction {
        self.table
            .greedy(self.hypotheses[task.0], state.pos, state.dir)
            .0
    }
}

impl DiscreteActions for GridQ {
    fn actions(&self, _state: &GridState) -> Vec<GridAction> {
        GridAction::ALL.to_vec()
    }
}
