//! Continuous point-mass goal reaching with closed-form optimal values.
//!
//! The agent moves by a displacement of norm at most `a_max` per step inside
//! a box arena and is rewarded `-distance` to the goal after each move. The
//! optimal policy heads straight for the goal, which gives
//! `V(d) = -sum_{k>=1} gamma^(k-1) * max(0, d - k * a_max)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{ContinuousActions, QSource, TaskId};

/// Distance under which the goal counts as reached.
pub const GOAL_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub min: Point,
    pub max: Point,
}

impl Arena {
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.min.x..=self.max.x).contains(&p.x) && (self.min.y..=self.max.y).contains(&p.y)
    }

    pub fn center(&self) -> Point {
        (self.min + self.max).scale(0.5)
    }
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            min: Point::new(-1.0, -1.0),
            max: Point::new(1.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgParams {
    pub a_max: f64,
    pub gamma: f64,
    pub arena: Arena,
    pub horizon: usize,
}

impl Default for PgParams {
    fn default() -> Self {
        Self {
            a_max: 0.2,
            gamma: 0.9,
            arena: Arena::default(),
            horizon: 30,
        }
    }
}

impl PgParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return Err(format!("a_max must be positive, got {}", self.a_max));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.horizon == 0 {
            return Err("horizon must be positive".into());
        }
        let a = self.arena;
        if !(a.min.x < a.max.x && a.min.y < a.max.y) {
            return Err("arena must have positive extent".into());
        }
        Ok(())
    }

    /// Scales `action` down to the displacement cap if needed.
    pub fn clip_action(&self, action: Point) -> Point {
        let n = action.norm();
        if n > self.a_max {
            action.scale(self.a_max / n)
        } else {
            action
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgTransition {
    pub next: Point,
    pub reward: f64,
    pub done: bool,
}

/// Applies one capped move. Horizon truncation is the caller's concern.
pub fn step(state: Point, action: Point, goal: Point, params: &PgParams) -> PgTransition {
    let next = params.arena.clamp(state + params.clip_action(action));
    let d = next.distance(goal);
    PgTransition {
        next,
        reward: -d,
        done: d < GOAL_TOLERANCE,
    }
}

/// Optimal discounted return from distance `d`.
pub fn value(distance: f64, params: &PgParams) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    let mut k = 1.0;
    loop {
        let remaining = distance - k * params.a_max;
        if remaining <= 0.0 {
            break;
        }
        total += discount * remaining;
        discount *= params.gamma;
        k += 1.0;
    }
    -total
}

pub fn q_value(state: Point, action: Point, goal: Point, params: &PgParams) -> f64 {
    let t = step(state, action, goal, params);
    let d = t.next.distance(goal);
    -d + params.gamma * value(d, params)
}

/// Straight toward the goal, landing on it when within reach.
pub fn policy(state: Point, goal: Point, params: &PgParams) -> Point {
    let delta = goal - state;
    let d = delta.norm();
    if d <= params.a_max {
        delta
    } else {
        delta.scale(params.a_max / d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskLayout {
    /// Cell centers of an evenly partitioned arena, row-major.
    Grid,
    /// Independent uniform draws.
    Random { seed: u64 },
}

/// Goal hypotheses over the arena.
///
/// The grid layout uses `ceil(sqrt(n))` columns and as many rows as needed,
/// keeping the first `n` cell centers.
pub fn tasks(n: usize, arena: &Arena, layout: TaskLayout) -> Vec<Point> {
    match layout {
        TaskLayout::Grid => {
            let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
            let rows = n.div_ceil(cols);
            let w = (arena.max.x - arena.min.x) / cols as f64;
            let h = (arena.max.y - arena.min.y) / rows as f64;
            (0..n)
                .map(|i| {
                    let (r, c) = (i / cols, i % cols);
                    Point::new(
                        arena.min.x + (c as f64 + 0.5) * w,
                        arena.min.y + (r as f64 + 0.5) * h,
                    )
                })
                .collect()
        }
        TaskLayout::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| {
                    Point::new(
                        rng.random_range(arena.min.x..=arena.max.x),
                        rng.random_range(arena.min.y..=arena.max.y),
                    )
                })
                .collect()
        }
    }
}

/// Analytic Q source over a fixed list of goal hypotheses.
#[derive(Clone, Debug)]
pub struct PointGoalQ {
    params: PgParams,
    goals: Vec<Point>,
}

impl PointGoalQ {
    pub fn new(params: PgParams, goals: Vec<Point>) -> Self {
        Self { params, goals }
    }

    pub fn params(&self) -> &PgParams {
        &self.params
    }

    pub fn goals(&self) -> &[Point] {
        &self.goals
    }
}

impl QSource for PointGoalQ {
    type State = Point;
    type Action = Point;

    fn num_tasks(&self) -> usize {
        self.goals.len()
    }

    fn q(&self, state: &Point, action: &Point, task: TaskId) -> f64 {
        q_value(*state, *action, self.goals[task.0], &self.params)
    }

    fn greedy(&self, state: &Point, task: TaskId) -> Point {
        policy(*state, self.goals[task.0], &self.params)
    }
}

impl ContinuousActions for PointGoalQ {
    /// Uniform over the disc of radius `a_max`.
    fn sample_action<R: Rng + ?Sized>(&self, _state: &Point, rng: &mut R) -> Point {
        let r = self.params.a_max * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        Point::new(r * theta.cos(), r * theta.sin())
    }

    fn blend(&self, weighted: &[(f64, Point)]) -> Point {
        weighted
            .iter()
            .fold(Point::default(), |acc, &(w, a)| acc + a.scale(w))
    }
}
