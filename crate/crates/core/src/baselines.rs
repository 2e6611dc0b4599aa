//! Comparison queriers: a coin-flip trigger and a posterior-variance trigger.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{
    greedy_with, variance_with, ActionPair, Choice, ContinuousActions, DiscreteActions,
    QueryRecord, ResponseModel, TaskBelief,
};
use crate::evoi::{act_continuous, response_marginals, sample_pair, QueryDecision};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("query probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("variance threshold must be nonnegative, got {0}")]
    InvalidThreshold(f64),
    #[error("sample count must be positive")]
    ZeroSamples,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomQuerierConfig {
    p_query: f64,
}

impl RandomQuerierConfig {
    pub fn new(p_query: f64) -> Result<Self, BaselineError> {
        if !(0.0..=1.0).contains(&p_query) {
            return Err(BaselineError::InvalidProbability(p_query));
        }
        Ok(Self { p_query })
    }

    pub fn p_query(&self) -> f64 {
        self.p_query
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyQuerierConfig {
    threshold: f64,
    n_samples: usize,
}

impl UncertaintyQuerierConfig {
    pub fn new(threshold: f64, n_samples: usize) -> Result<Self, BaselineError> {
        if threshold.is_nan() || threshold < 0.0 {
            return Err(BaselineError::InvalidThreshold(threshold));
        }
        if n_samples == 0 {
            return Err(BaselineError::ZeroSamples);
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

/// Best and second-best actions by posterior-expected value, earliest index
/// first on ties.
pub fn top_two<Q: DiscreteActions>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
) -> Option<ActionPair<Q::Action>> {
    let weights = belief.weights();
    let actions = q.actions(state);
    let (best, _) = greedy_with(&weights, state, q, &actions).ok()?;
    let rest: Vec<Q::Action> = actions
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, a)| a.clone())
        .collect();
    let (second, _) = greedy_with(&weights, state, q, &rest).ok()?;
    ActionPair::new(actions[best].clone(), rest[second].clone())
}

/// Draws one uniform number per call and asks the top two actions when it
/// falls below `p_query`.
pub fn random_decide_discrete<Q: DiscreteActions, R: Rng + ?Sized>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    cfg: &RandomQuerierConfig,
    rng: &mut R,
) -> QueryDecision<Q::Action> {
    let u: f64 = rng.random();
    if u < cfg.p_query {
        QueryDecision {
            pair: top_two(belief, state, q),
            value: u,
            considered: 1,
        }
    } else {
        QueryDecision::none(u, 0)
    }
}

/// Continuous form: the query is two independent uniformly sampled actions.
pub fn random_decide_continuous<Q: ContinuousActions, R: Rng + ?Sized>(
    _belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    cfg: &RandomQuerierConfig,
    rng: &mut R,
) -> QueryDecision<Q::Action> {
    let u: f64 = rng.random();
    if u < cfg.p_query {
        QueryDecision {
            pair: Some(sample_pair(state, q, rng)),
            value: u,
            considered: 1,
        }
    } else {
        QueryDecision::none(u, 0)
    }
}

/// Asks the top two actions whenever the posterior variance of the greedy
/// action's value exceeds the threshold.
pub fn uncertainty_decide_discrete<Q: DiscreteActions>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    cfg: &UncertaintyQuerierConfig,
) -> QueryDecision<Q::Action> {
    let weights = belief.weights();
    let actions = q.actions(state);
    let Ok((best, _)) = greedy_with(&weights, state, q, &actions) else {
        return QueryDecision::none(0.0, 0);
    };
    let variance = variance_with(&weights, state, &actions[best], q);
    if variance > cfg.threshold {
        QueryDecision {
            pair: top_two(belief, state, q),
            value: variance,
            considered: 1,
        }
    } else {
        QueryDecision::none(variance, 0)
    }
}

/// Expected posterior variance of the value of the action the agent would
/// take after hearing the answer to `pair`.
pub fn expected_posterior_variance<Q: ContinuousActions>(
    belief: &TaskBelief,
    state: &Q::State,
    pair: &ActionPair<Q::Action>,
    q: &Q,
    model: &ResponseModel,
) -> f64 {
    let (p1, p2) = response_marginals(belief, state, pair, q, model);
    [(Choice::First, p1), (Choice::Second, p2)]
        .into_iter()
        .map(|(chosen, p)| {
            let record = QueryRecord {
                state: state.clone(),
                pair: pair.clone(),
                chosen,
            };
            let post = belief.condition(&record, q, model).unwrap_or_else(|_| belief.clone());
            let action = act_continuous(&post, state, q);
            p * variance_with(&post.weights(), state, &action, q)
        })
        .sum()
}

/// Continuous form: triggers on the variance at the belief-averaged action
/// and picks, among sampled pairs, the one whose answer is expected to leave
/// the least variance.
pub fn uncertainty_decide_continuous<Q: ContinuousActions, R: Rng + ?Sized>(
    belief: &TaskBelief,
    state: &Q::State,
    q: &Q,
    model: &ResponseModel,
    cfg: &UncertaintyQuerierConfig,
    rng: &mut R,
) -> QueryDecision<Q::Action> {
    let action = act_continuous(belief, state, q);
    let variance = variance_with(&belief.weights(), state, &action, q);
    if variance <= cfg.threshold {
        return QueryDecision::none(variance, 0);
    }
    let mut best: Option<(ActionPair<Q::Action>, f64)> = None;
    for _ in 0..cfg.n_samples {
        let pair = sample_pair(state, q, rng);
        let score = expected_posterior_variance(belief, state, &pair, q, model);
        if best.as_ref().is_none_or(|(_, s)| score < *s) {
            best = Some((pair, score));
        }
    }
    QueryDecision {
        pair: best.map(|(p, _)| p),
        value: variance,
        considered: cfg.n_samples,
    }
}
