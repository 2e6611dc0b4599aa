use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{RandomQuerierConfig, UncertaintyQuerierConfig};
use crate::belief::{ActionPair, Choice, QSource, QueryRecord, ResponseModel, TaskBelief, TaskId};
use crate::evoi::QuerierConfig;
use crate::expert::{self, ExpertConfig, ExpertMode};

use super::world::{EnvAction, EnvState, Querier, World};
use super::HarnessError;

/// Default number of sampled pairs per decision in continuous spaces.
pub const DEFAULT_PAIR_SAMPLES: usize = 16;

const TASK_STREAM: u64 = 0;
const EXPERT_STREAM: u64 = 1;
const METHOD_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Evoi,
    Random,
    Uncertainty,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::Evoi, MethodKind::Random, MethodKind::Uncertainty];

    pub fn with_param(self, param: f64) -> Method {
        match self {
            MethodKind::Evoi => Method::Evoi { threshold: param },
            MethodKind::Random => Method::Random { p_query: param },
            MethodKind::Uncertainty => Method::Uncertainty { threshold: param },
        }
    }

    /// Default sweep range: the threshold for EVOI and uncertainty, the
    /// query probability for random.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            MethodKind::Evoi => (1e-4, 1e-1),
            MethodKind::Random => (0.05, 0.5),
            MethodKind::Uncertainty => (1e-4, 1e1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Evoi => "evoi",
            MethodKind::Random => "random",
            MethodKind::Uncertainty => "uncertainty",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MethodKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "evoi" => Ok(MethodKind::Evoi),
            "random" => Ok(MethodKind::Random),
            "uncertainty" => Ok(MethodKind::Uncertainty),
            other => Err(HarnessError::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Querying method and its single tuning parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Evoi { threshold: f64 },
    Random { p_query: f64 },
    Uncertainty { threshold: f64 },
}

impl Method {
    pub fn kind(&self) -> MethodKind {
        match self {
            Method::Evoi { .. } => MethodKind::Evoi,
            Method::Random { .. } => MethodKind::Random,
            Method::Uncertainty { .. } => MethodKind::Uncertainty,
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            Method::Evoi { threshold } => threshold,
            Method::Random { p_query } => p_query,
            Method::Uncertainty { threshold } => threshold,
        }
    }

    pub fn querier(&self, n_samples: usize) -> Result<Querier, HarnessError> {
        let cfg = |e: String| HarnessError::Config(e);
        Ok(match *self {
            Method::Evoi { threshold } => Querier::Evoi(
                QuerierConfig::new(threshold, n_samples).map_err(|e| cfg(e.to_string()))?,
            ),
            Method::Random { p_query } => Querier::Random(
                RandomQuerierConfig::new(p_query).map_err(|e| cfg(e.to_string()))?,
            ),
            Method::Uncertainty { threshold } => Querier::Uncertainty(
                UncertaintyQuerierConfig::new(threshold, n_samples)
                    .map_err(|e| cfg(e.to_string()))?,
            ),
        })
    }
}

/// Everything that determines one episode, given the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub method: Method,
    pub beta: f64,
    pub expert: ExpertMode,
    pub seed: u64,
    /// Hidden task; drawn from the prior with the seed when absent.
    pub true_task: Option<TaskId>,
    /// Prior weights over hypotheses; uniform when absent.
    pub prior: Option<Vec<f64>>,
    pub n_samples: usize,
}

impl EpisodeConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            beta: 10.0,
            expert: ExpertMode::Deterministic,
            seed,
            true_task: None,
            prior: None,
            n_samples: DEFAULT_PAIR_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub state: EnvState,
    pub query: Option<[EnvAction; 2]>,
    pub response: Option<Choice>,
    pub action: EnvAction,
    pub reward: f64,
    /// Posterior entropy (nats) of the belief the action was chosen with.
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub score: f64,
    pub n_queries: usize,
    pub n_repetitive: usize,
    pub steps: usize,
    pub reached_goal: bool,
    pub true_task: TaskId,
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// The querier has not yet run for the current step.
    Deciding,
    /// A query awaits an answer.
    Pending,
    /// Ready to act for the current step.
    Acting,
    Finished,
}

/// An answered query in a world's state and action types.
pub type Record<W> = QueryRecord<<<W as World>::Q as QSource>::State, <<W as World>::Q as QSource>::Action>;

/// Step-by-step episode driver.
///
/// Each step runs `decide`, then `answer` if a query was posed, then `act`.
/// The answer updates the posterior before the same step's action is chosen.
pub struct Episode<'w, W: World> {
    world: &'w W,
    querier: Querier,
    model: ResponseModel,
    expert: ExpertConfig,
    prior: TaskBelief,
    belief: TaskBelief,
    state: <W::Q as QSource>::State,
    true_task: TaskId,
    history: Vec<Record<W>>,
    expert_rng: ChaCha8Rng,
    method_rng: ChaCha8Rng,
    phase: Phase,
    pending: Option<ActionPair<<W::Q as QSource>::Action>>,
    current_query: Option<(ActionPair<<W::Q as QSource>::Action>, Choice)>,
    previous_query: Option<ActionPair<<W::Q as QSource>::Action>>,
    n_queries: usize,
    n_repetitive: usize,
    rewards: Vec<f64>,
    reached_goal: bool,
    trace: Vec<TraceStep>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<'w, W: World> Episode<'w, W> {
    pub fn new(world: &'w W, cfg: &EpisodeConfig) -> Result<Self, HarnessError> {
        let n = world.qsource().num_tasks();
        let querier = cfg.method.querier(cfg.n_samples)?;
        let model = ResponseModel::new(cfg.beta).map_err(|e| HarnessError::Config(e.to_string()))?;
        let prior = match &cfg.prior {
            None => TaskBelief::uniform(n),
            Some(w) if w.len() == n => TaskBelief::from_weights(w),
            Some(w) => {
                return Err(HarnessError::Config(format!(
                    "prior has {} weights for {n} hypotheses",
                    w.len()
                )))
            }
        }
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        let true_task = match cfg.true_task {
            Some(t) if t.0 < n => t,
            Some(t) => {
                return Err(HarnessError::Config(format!(
                    "true task {} outside {n} hypotheses",
                    t.0
                )))
            }
            None => TaskId(stream(cfg.seed, TASK_STREAM).random_range(0..n)),
        };
        Ok(Self {
            world,
            querier,
            model,
            expert: ExpertConfig {
                model,
                mode: cfg.expert,
            },
            belief: prior.clone(),
            prior,
            state: world.initial_state(),
            true_task,
            history: Vec::new(),
            expert_rng: stream(cfg.seed, EXPERT_STREAM),
            method_rng: stream(cfg.seed, METHOD_STREAM),
            phase: Phase::Deciding,
            pending: None,
            current_query: None,
            previous_query: None,
            n_queries: 0,
            n_repetitive: 0,
            rewards: Vec::new(),
            reached_goal: false,
            trace: Vec::new(),
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    pub fn world(&self) -> &'w W {
        self.world
    }

    pub fn belief(&self) -> &TaskBelief {
        &self.belief
    }

    pub fn state(&self) -> &<W::Q as QSource>::State {
        &self.state
    }

    pub fn true_task(&self) -> TaskId {
        self.true_task
    }

    pub fn steps(&self) -> usize {
        self.rewards.len()
    }

    pub fn n_queries(&self) -> usize {
        self.n_queries
    }

    pub fn reached_goal(&self) -> bool {
        self.reached_goal
    }

    pub fn n_repetitive(&self) -> usize {
        self.n_repetitive
    }

    pub fn pending(&self) -> Option<&ActionPair<<W::Q as QSource>::Action>> {
        self.pending.as_ref()
    }

    pub fn history(&self) -> &[Record<W>] {
        &self.history
    }

    /// Runs the querier for the current step. Returns the posed query, if any.
    pub fn decide(&mut self) -> Result<Option<ActionPair<<W::Q as QSource>::Action>>, HarnessError> {
        if self.phase != Phase::Deciding {
            return Err(HarnessError::Protocol(format!(
                "cannot decide in phase {:?}",
                self.phase
            )));
        }
        let decision = self.world.decide(
            &self.querier,
            &self.belief,
            &self.state,
            &self.model,
            &mut self.method_rng,
        );
        match decision.pair {
            Some(pair) => {
                self.pending = Some(pair.clone());
                self.phase = Phase::Pending;
                Ok(Some(pair))
            }
            None => {
                self.phase = Phase::Acting;
                Ok(None)
            }
        }
    }

    /// What the simulated expert would answer to the pending query.
    pub fn simulated_answer(&mut self) -> Option<Choice> {
        let pair = self.pending.as_ref()?;
        Some(expert::respond(
            pair,
            &self.state,
            self.true_task,
            self.world.qsource(),
            &self.expert,
            &mut self.expert_rng,
        ))
    }

    /// Folds the answer to the pending query into the posterior.
    pub fn answer(&mut self, choice: Choice) -> Result<(), HarnessError> {
        let pair = match (self.phase, self.pending.take()) {
            (Phase::Pending, Some(pair)) => pair,
            (phase, pending) => {
                self.pending = pending;
                return Err(HarnessError::Protocol(format!(
                    "no pending query in phase {phase:?}"
                )));
            }
        };
        let record = QueryRecord {
            state: self.state.clone(),
            pair: pair.clone(),
            chosen: choice,
        };
        self.belief = match self.belief.condition(&record, self.world.qsource(), &self.model) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("posterior update failed ({e}); resetting to the prior");
                self.prior.clone()
            }
        };
        self.history.push(record);
        self.n_queries += 1;
        if self
            .previous_query
            .as_ref()
            .is_some_and(|prev| prev.same_question(&pair))
        {
            self.n_repetitive += 1;
        }
        self.current_query = Some((pair, choice));
        self.phase = Phase::Acting;
        Ok(())
    }

    /// Takes the belief-greedy action and advances the environment.
    pub fn act(&mut self) -> Result<TraceStep, HarnessError> {
        if self.phase != Phase::Acting {
            return Err(HarnessError::Protocol(format!(
                "cannot act in phase {:?}",
                self.phase
            )));
        }
        let action = self.world.act(&self.belief, &self.state);
        let tr = self.world.transition(&self.state, &action, self.true_task);
        let query = self.current_query.take();
        let step = TraceStep {
            t: self.rewards.len(),
            state: self.world.state_repr(&self.state),
            query: query.as_ref().map(|(p, _)| {
                [
                    self.world.action_repr(&p.first),
                    self.world.action_repr(&p.second),
                ]
            }),
            response: query.as_ref().map(|(_, c)| *c),
            action: self.world.action_repr(&action),
            reward: tr.reward,
            entropy: self.belief.entropy(),
        };
        self.previous_query = query.map(|(p, _)| p);
        self.rewards.push(tr.reward);
        self.reached_goal |= tr.reached_goal;
        self.state = tr.next;
        self.trace.push(step.clone());
        self.phase = if tr.terminal || self.rewards.len() >= self.world.horizon() {
            Phase::Finished
        } else {
            Phase::Deciding
        };
        Ok(step)
    }

    pub fn score(&self) -> f64 {
        self.world.score(&self.rewards, self.reached_goal)
    }

    pub fn result(&self) -> EpisodeResult {
        EpisodeResult {
            score: self.score(),
            n_queries: self.n_queries,
            n_repetitive: self.n_repetitive,
            steps: self.rewards.len(),
            reached_goal: self.reached_goal,
            true_task: self.true_task,
            trace: self.trace.clone(),
        }
    }

    pub fn into_result(self) -> EpisodeResult {
        EpisodeResult {
            score: self.world.score(&self.rewards, self.reached_goal),
            n_queries: self.n_queries,
            n_repetitive: self.n_repetitive,
            steps: self.rewards.len(),
            reached_goal: self.reached_goal,
            true_task: self.true_task,
            trace: self.trace,
        }
    }

    /// Plays to the end, answering queries with `responder`.
    pub fn run_with<F>(mut self, mut responder: F) -> Result<EpisodeResult, HarnessError>
    where
        F: FnMut(&mut Self) -> Result<Choice, HarnessError>,
    {
        while !self.is_finished() {
            if self.decide()?.is_some() {
                let choice = responder(&mut self)?;
                self.answer(choice)?;
            }
            self.act()?;
        }
        Ok(self.into_result())
    }
}

/// Plays one episode against the simulated expert.
pub fn run_episode<W: World>(world: &W, cfg: &EpisodeConfig) -> Result<EpisodeResult, HarnessError> {
    Episode::new(world, cfg)?.run_with(|ep| {
        ep.simulated_answer()
            .ok_or_else(|| HarnessError::Protocol("no pending query".into()))
    })
}

/// Replays recorded answers in order; errors if the episode asks more
/// questions than were recorded.
pub fn replay_episode<W: World>(
    world: &W,
    cfg: &EpisodeConfig,
    answers: &[Choice],
) -> Result<EpisodeResult, HarnessError> {
    let mut next = answers.iter().copied();
    Episode::new(world, cfg)?.run_with(|_| {
        next.next()
            .ok_or_else(|| HarnessError::Protocol("transcript ran out of answers".into()))
    })
}
