//! Task posterior and the Boltzmann-rational response model.
//!
//! An expert who knows the hidden task answers a pairwise action query
//! `(a1, a2)` by picking `a1` with probability
//! `1 / (1 + exp(beta * (Q(s, a2; task) - Q(s, a1; task))))`.
//! [`TaskBelief`] keeps a discrete posterior over task hypotheses that is
//! conditioned on every answered query, stored in the log domain so long
//! histories of confident answers do not underflow.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("belief support must be non-empty")]
    EmptySupport,
    #[error("invalid weight {value} at index {index}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("all posterior weights vanished; history is impossible under the response model")]
    DegenerateBelief,
    #[error("task {task} outside support of size {len}")]
    UnknownTask { task: usize, len: usize },
    #[error("response precision must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("candidate action list is empty")]
    EmptyCandidates,
}

/// Index of one task hypothesis within a finite support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId(pub usize);

impl TaskId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Boltzmann choice model with precision `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    beta: f64,
}

impl ResponseModel {
    pub fn new(beta: f64) -> Result<Self, BeliefError> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(BeliefError::InvalidBeta(beta));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Probability that the expert picks the action worth `q_chosen` over the
    /// one worth `q_rejected`.
    pub fn probability(&self, q_chosen: f64, q_rejected: f64) -> f64 {
        logistic(self.beta * (q_chosen - q_rejected))
    }

    /// Natural log of [`ResponseModel::probability`], accurate far into the tails.
    pub fn log_probability(&self, q_chosen: f64, q_rejected: f64) -> f64 {
        log_logistic(self.beta * (q_chosen - q_rejected))
    }
}

/// Free-function form of [`ResponseModel::probability`].
pub fn response_probability(q_chosen: f64, q_rejected: f64, model: &ResponseModel) -> f64 {
    model.probability(q_chosen, q_rejected)
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Which side of a pairwise query the expert picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
}

impl Choice {
    pub fn other(self) -> Self {
        match self {
            Choice::First => Choice::Second,
            Choice::Second => Choice::First,
        }
    }
}

/// Two distinct actions offered to the expert.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionPair<A> {
    pub first: A,
    pub second: A,
}

impl<A: PartialEq> ActionPair<A> {
    /// Returns `None` when both actions are equal.
    pub fn new(first: A, second: A) -> Option<Self> {
        (first != second).then_some(Self { first, second })
    }

    /// Same question regardless of presentation order.
    pub fn same_question(&self, other: &Self) -> bool {
        (self.first == other.first && self.second == other.second)
            || (self.first == other.second && self.second == other.first)
    }
}

impl<A> ActionPair<A> {
    pub fn get(&self, choice: Choice) -> &A {
        match choice {
            Choice::First => &self.first,
            Choice::Second => &self.second,
        }
    }

    pub fn swapped(self) -> Self {
        Self {
            first: self.second,
            second: self.first,
        }
    }
}

/// One answered query: the state it was asked in, the pair, and the answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord<S, A> {
    pub state: S,
    pub pair: ActionPair<A>,
    pub chosen: Choice,
}

impl<S, A> QueryRecord<S, A> {
    pub fn chosen_action(&self) -> &A {
        self.pair.get(self.chosen)
    }

    pub fn rejected_action(&self) -> &A {
        self.pair.get(self.chosen.other())
    }
}

/// Task-conditioned action values and per-task greedy actions.
///
/// `q` must be deterministic. In discrete environments `greedy` attains the
/// maximum of `q` over [`DiscreteActions::actions`].
pub trait QSource {
    type State: Clone;
    type Action: Clone + PartialEq;

    fn num_tasks(&self) -> usize;

    fn q(&self, state: &Self::State, action: &Self::Action, task: TaskId) -> f64;

    fn greedy(&self, state: &Self::State, task: TaskId) -> Self::Action;
}

/// A finite action inventory.
pub trait DiscreteActions: QSource {
    fn actions(&self, state: &Self::State) -> Vec<Self::Action>;
}

/// A continuous action space that can be sampled and averaged.
pub trait ContinuousActions: QSource {
    fn sample_action<R: Rng + ?Sized>(&self, state: &Self::State, rng: &mut R) -> Self::Action;

    /// Weighted combination of actions; weights sum to one.
    fn blend(&self, weighted: &[(f64, Self::Action)]) -> Self::Action;
}

/// Discrete posterior over task hypotheses.
///
/// Log weights are kept normalized (their log-sum-exp is zero). Hypotheses
/// with zero probability carry `-inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskBelief {
    log_weights: Vec<f64>,
}

impl TaskBelief {
    pub fn uniform(n: usize) -> Result<Self, BeliefError> {
        if n == 0 {
            return Err(BeliefError::EmptySupport);
        }
        Ok(Self {
            log_weights: vec![-(n as f64).ln(); n],
        })
    }

    /// Builds a belief from nonnegative (not necessarily normalized) weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self, BeliefError> {
        if weights.is_empty() {
            return Err(BeliefError::EmptySupport);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(BeliefError::InvalidWeight { index, value });
            }
        }
        Self::from_log_unnormalized(weights.iter().map(|w| w.ln()).collect())
    }

    pub fn point_mass(n: usize, task: TaskId) -> Result<Self, BeliefError> {
        if n == 0 {
            return Err(BeliefError::EmptySupport);
        }
        if task.0 >= n {
            return Err(BeliefError::UnknownTask { task: task.0, len: n });
        }
        let mut log_weights = vec![f64::NEG_INFINITY; n];
        log_weights[task.0] = 0.0;
        Ok(Self { log_weights })
    }

    fn from_log_unnormalized(mut log_weights: Vec<f64>) -> Result<Self, BeliefError> {
        if let Some(index) = log_weights.iter().position(|w| w.is_nan()) {
            return Err(BeliefError::InvalidWeight {
                index,
                value: f64::NAN,
            });
        }
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(BeliefError::DegenerateBelief);
        }
        let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
        let norm = max + total.ln();
        for w in &mut log_weights {
            *w -= norm;
        }
        Ok(Self { log_weights })
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = TaskId> + '_ {
        (0..self.log_weights.len()).map(TaskId)
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Normalized probabilities, summing to one up to rounding.
    pub fn weights(&self) -> Vec<f64> {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self.log_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    pub fn weight(&self, task: TaskId) -> f64 {
        self.log_weights[task.0].exp()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.weights()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }

    /// Index of the most probable hypothesis (lowest index on ties).
    pub fn mode(&self) -> TaskId {
        let mut best = 0;
        for (i, &w) in self.log_weights.iter().enumerate() {
            if w > self.log_weights[best] {
                best = i;
            }
        }
        TaskId(best)
    }

    /// Conditions on one more answered query.
    pub fn condition<Q: QSource>(
        &self,
        record: &QueryRecord<Q::State, Q::Action>,
        q: &Q,
        model: &ResponseModel,
    ) -> Result<Self, BeliefError> {
        let mut log_weights = self.log_weights.clone();
        accumulate_log_likelihood(&mut log_weights, record, q, model);
        Self::from_log_unnormalized(log_weights)
    }
}

fn accumulate_log_likelihood<Q: QSource>(
    log_weights: &mut [f64],
    record: &QueryRecord<Q::State, Q::Action>,
    q: &Q,
    model: &ResponseModel,
) {
    let chosen = record.chosen_action();
    let rejected = record.rejected_action();
    for (i, w) in log_weights.iter_mut().enumerate() {
        if *w == f64::NEG_INFINITY {
            continue;
        }
        let task = TaskId(i);
        *w += model.log_probability(
            q.q(&record.state, chosen, task),
            q.q(&record.state, rejected, task),
        );
    }
}

/// Posterior over tasks after the whole history, computed in one pass.
pub fn posterior_from_history<Q: QSource>(
    prior: &TaskBelief,
    history: &[QueryRecord<Q::State, Q::Action>],
    q: &Q,
    model: &ResponseModel,
) -> Result<TaskBelief, BeliefError> {
    let mut log_weights = prior.log_weights.clone();
    for record in history {
        accumulate_log_likelihood(&mut log_weights, record, q, model);
    }
    TaskBelief::from_log_unnormalized(log_weights)
}

fn expected_with<Q: QSource>(
    weights: &[f64],
    state: &Q::State,
    action: &Q::Action,
    q: &Q,
) -> f64 {
    weights
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| p * q.q(state, action, TaskId(i)))
        .sum()
}

/// Posterior-expected action value.
pub fn expected_q<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    action: &Q::Action,
    q: &Q,
) -> f64 {
    expected_with(&belief.weights(), state, action, q)
}

/// Candidate with the highest posterior-expected value; ties go to the
/// earliest candidate.
pub fn greedy_expected<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    candidates: &[Q::Action],
) -> Result<(usize, f64), BeliefError> {
    greedy_with(&belief.weights(), state, q, candidates)
}

pub(crate) fn greedy_with<Q: QSource>(
    weights: &[f64],
    state: &Q::State,
    q: &Q,
    candidates: &[Q::Action],
) -> Result<(usize, f64), BeliefError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, action) in candidates.iter().enumerate() {
        let value = expected_with(weights, state, action, q);
        match best {
            Some((_, v)) if value <= v => {}
            _ => best = Some((i, value)),
        }
    }
    best.ok_or(BeliefError::EmptyCandidates)
}

/// Posterior variance of one action's value across task hypotheses.
pub fn variance_at<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    action: &Q::Action,
    q: &Q,
) -> f64 {
    variance_with(&belief.weights(), state, action, q)
}

pub(crate) fn variance_with<Q: QSource>(
    weights: &[f64],
    state: &Q::State,
    action: &Q::Action,
    q: &Q,
) -> f64 {
    let values: Vec<(f64, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (p, q.q(state, action, TaskId(i))))
        .collect();
    let mean: f64 = values.iter().map(|(p, v)| p * v).sum();
    let var: f64 = values.iter().map(|(p, v)| p * (v - mean) * (v - mean)).sum();
    var.max(0.0)
}
