//! Expected value of information for pairwise action queries.
//!
//! The value of a belief at a state is `max_a E[Q(s, a; task)]`, the
//! posterior-expected value of the action the agent would take. A query is
//! worth the expected gain in that quantity once the answer is folded into
//! the posterior:
//!
//! ```text
//! EVOI(a1, a2) = p1 * value(belief | a1) + p2 * value(belief | a2) - value(belief)
//! ```
//!
//! where `p1, p2` are the posterior-predictive answer probabilities. The max
//! sits outside the task expectation. Putting it inside (averaging each
//! task's own best value) makes the whole expression vanish identically by
//! the law of total expectation, so that reading is never used.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{
    greedy_with, ActionPair, Choice, ContinuousActions, DiscreteActions, QSource, QueryRecord,
    ResponseModel, TaskBelief, TaskId,
};

/// Tasks below this posterior weight do not contribute a candidate action in
/// continuous spaces.
pub const CANDIDATE_WEIGHT_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuerierError {
    #[error("query threshold must be finite and nonnegative, got {0}")]
    InvalidThreshold(f64),
    #[error("sample count must be positive")]
    ZeroSamples,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerierConfig {
    threshold: f64,
    n_samples: usize,
}

impl QuerierConfig {
    pub fn new(threshold: f64, n_samples: usize) -> Result<Self, QuerierError> {
        if threshold.is_nan() || threshold < 0.0 {
            return Err(QuerierError::InvalidThreshold(threshold));
        }
        if n_samples == 0 {
            return Err(QuerierError::ZeroSamples);
        }
        Ok(Self {
            threshold,
            n_samples,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
}

/// Outcome of one per-step querying decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryDecision<A> {
    /// The query to present, higher expected-value action first.
    pub pair: Option<ActionPair<A>>,
    /// EVOI of the best pair for the EVOI querier; the trigger statistic for
    /// the baselines.
    pub value: f64,
    pub considered: usize,
}

impl<A> QueryDecision<A> {
    pub fn none(value: f64, considered: usize) -> Self {
        Self {
            pair: None,
            value,
            considered,
        }
    }
}

/// Posterior-predictive probability of each answer.
pub fn response_marginals<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    pair: &ActionPair<Q::Action>,
    q: &Q,
    model: &ResponseModel,
) -> (f64, f64) {
    let p1: f64 = belief
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| {
            let task = TaskId(i);
            p * model.probability(q.q(state, &pair.first, task), q.q(state, &pair.second, task))
        })
        .sum();
    let p1 = p1.clamp(0.0, 1.0);
    (p1, 1.0 - p1)
}

/// Value of a belief at `state`: best posterior-expected action value over
/// `candidates`.
pub fn belief_value<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    candidates: &[Q::Action],
) -> f64 {
    greedy_with(&belief.weights(), state, q, candidates)
        .map(|(_, v)| v)
        .unwrap_or(0.0)
}

fn conditioned<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    pair: &ActionPair<Q::Action>,
    chosen: Choice,
    q: &Q,
    model: &ResponseModel,
) -> TaskBelief {
    let record = QueryRecord {
        state: state.clone(),
        pair: pair.clone(),
        chosen,
    };
    // An answer the model deems impossible carries no usable information.
    belief
        .condition(&record, q, model)
        .unwrap_or_else(|_| belief.clone())
}

/// Expected gain in belief value from asking `pair` at `state`.
pub fn evoi_of_pair<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    pair: &ActionPair<Q::Action>,
    q: &Q,
    model: &ResponseModel,
    candidates: &[Q::Action],
) -> f64 {
    let (p1, p2) = response_marginals(belief, state, pair, q, model);
    let before = belief_value(belief, state, q, candidates);
    let after_first = belief_value(
        &conditioned(belief, state, pair, Choice::First, q, model),
        state,
        q,
        candidates,
    );
    let after_second = belief_value(
        &conditioned(belief, state, pair, Choice::Second, q, model),
        state,
        q,
        candidates,
    );
    p1 * (after_first - before) + p2 * (after_second - before)
}

/// Orders a pair so the action with the higher expected value comes first
/// (the earlier one on ties).
pub(crate) fn presentation_order<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    pair: ActionPair<Q::Action>,
    q: &Q,
) -> ActionPair<Q::Action> {
    let weights = belief.weights();
    let (best, _) = greedy_with(
        &weights,
        state,
        q,
        &[pair.first.clone(), pair.second.clone()],
    )
    .expect("two candidates");
    if best == 0 {
        pair
    } else {
        pair.swapped()
    }
}

/// Scores every unordered pair of distinct actions and asks the best one if
/// its EVOI exceeds the threshold.
pub fn select_query_discrete<Q: DiscreteActions>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    model: &ResponseModel,
    cfg: &QuerierConfig,
) -> QueryDecision<Q::Action> {
    let actions = q.actions(state);
    let mut best: Option<(ActionPair<Q::Action>, f64)> = None;
    let mut considered = 0;
    for i in 0..actions.len() {
        for j in (i + 1)..actions.len() {
            let Some(pair) = ActionPair::new(actions[i].clone(), actions[j].clone()) else {
                continue;
            };
            considered += 1;
            let value = evoi_of_pair(belief, state, &pair, q, model, &actions);
            if best.as_ref().is_none_or(|(_, v)| value > *v) {
                best = Some((pair, value));
            }
        }
    }
    finish(belief, state, q, best, considered, cfg.threshold)
}

fn finish<Q: QSource>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    best: Option<(ActionPair<Q::Action>, f64)>,
    considered: usize,
    threshold: f64,
) -> QueryDecision<Q::Action> {
    match best {
        Some((pair, value)) if value > threshold => QueryDecision {
            pair: Some(presentation_order(belief, state, pair, q)),
            value,
            considered,
        },
        Some((_, value)) => QueryDecision::none(value, considered),
        None => QueryDecision::none(0.0, considered),
    }
}

/// Per-task greedy actions of every non-negligible hypothesis, followed by
/// the belief-averaged action.
pub fn continuous_candidates<Q: ContinuousActions>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
) -> Vec<Q::Action> {
    let mut candidates: Vec<Q::Action> = Vec::new();
    for (i, p) in belief.weights().into_iter().enumerate() {
        if p > CANDIDATE_WEIGHT_FLOOR {
            let action = q.greedy(state, TaskId(i));
            if !candidates.contains(&action) {
                candidates.push(action);
            }
        }
    }
    let blended = act_continuous(belief, state, q);
    if !candidates.contains(&blended) {
        candidates.push(blended);
    }
    candidates
}

/// Draws two distinct actions.
pub(crate) fn sample_pair<Q: ContinuousActions, R: Rng + ?Sized>(
    state: &Q::State,
    q: &Q,
    rng: &mut R,
) -> ActionPair<Q::Action> {
    let first = q.sample_action(state, rng);
    loop {
        let second = q.sample_action(state, rng);
        if let Some(pair) = ActionPair::new(first.clone(), second) {
            return pair;
        }
    }
}

/// Samples `n_samples` random pairs and asks the highest-EVOI one if it
/// exceeds the threshold.
pub fn select_query_continuous<Q: ContinuousActions, R: Rng + ?Sized>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    model: &ResponseModel,
    cfg: &QuerierConfig,
    rng: &mut R,
) -> QueryDecision<Q::Action> {
    let candidates = continuous_candidates(belief, state, q);
    let mut best: Option<(ActionPair<Q::Action>, f64)> = None;
    for _ in 0..cfg.n_samples {
        let pair = sample_pair(state, q, rng);
        let value = evoi_of_pair(belief, state, &pair, q, model, &candidates);
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((pair, value));
        }
    }
    finish(belief, state, q, best, cfg.n_samples, cfg.threshold)
}

/// Greedy action under the posterior-expected Q over the full inventory.
pub fn act_discrete<Q: DiscreteActions>(belief: &TaskBelief, state: &Q::State, q: &Q) -> Q::Action {
    let actions = q.actions(state);
    let (i, _) = greedy_with(&belief.weights(), state, q, &actions)
        .expect("discrete environments expose at least one action");
    actions[i].clone()
}

/// Probability-weighted average of the per-task greedy actions.
pub fn act_continuous<Q: ContinuousActions>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
) -> Q::Action {
    let weighted: Vec<(f64, Q::Action)> = belief
        .weights()
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 0.0)
        .map(|(i, p)| (p, q.greedy(state, TaskId(i))))
        .collect();
    q.blend(&weighted)
}
