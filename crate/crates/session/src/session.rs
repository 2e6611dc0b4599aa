//! One live episode answered by a human: a thin state machine over the
//! core episode driver that turns each transition into wire events.

use std::sync::Arc;

use prefq_core::belief::{Choice, QSource, TaskId};
use prefq_core::gridworld::{self, Cell, GridAction, GridState, GridTask, Pos};
use prefq_core::harness::{
    EnvAction, Episode, EpisodeConfig, EpisodeResult, GridEnv, HarnessError, Method, Phase,
    DEFAULT_PAIR_SAMPLES,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{
    BeliefSummary, Cause, EpisodeEnd, EventBody, GoalMass, GridSnapshot, Metrics, Pose,
    QueryOption, QueryPosed, StateUpdate, WireEvent, PROTOCOL_VERSION,
};

/// Value-of-information bar used when a request names no method.
pub const DEFAULT_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("a query is pending; answer it first")]
    PendingQuery,
    #[error("no query is pending")]
    NoPendingQuery,
    #[error("invalid choice {0:?}; expected \"first\" or \"second\"")]
    InvalidChoice(String),
    #[error("the episode is over")]
    EpisodeOver,
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl SessionError {
    /// Stable machine-readable code sent in error replies.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Config(_) => "config",
            SessionError::PendingQuery => "pending_query",
            SessionError::NoPendingQuery => "no_pending_query",
            SessionError::InvalidChoice(_) => "invalid_choice",
            SessionError::EpisodeOver => "episode_over",
            SessionError::UnknownSession(_) => "unknown_session",
            SessionError::BadRequest(_) => "bad_request",
            SessionError::Internal(_) => "internal",
        }
    }
}

impl From<HarnessError> for SessionError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(m) => SessionError::Config(m),
            other => SessionError::Internal(other.to_string()),
        }
    }
}

/// Parses a wire choice label.
pub fn parse_choice(label: &str) -> Result<Choice, SessionError> {
    match label {
        "first" => Ok(Choice::First),
        "second" => Ok(Choice::Second),
        other => Err(SessionError::InvalidChoice(other.to_string())),
    }
}

/// What a client may set when opening a session. Absent fields take the
/// defaults; an absent map means the server's default map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub map: Option<String>,
    pub method: Method,
    pub beta: f64,
    pub seed: u64,
    /// Goal the human is steering toward; drawn with the seed when absent.
    pub true_goal: Option<Pos>,
    /// Goal hypotheses in task-id order; every valid goal when absent.
    pub hypotheses: Option<Vec<Pos>>,
    pub prior: Option<Vec<f64>>,
    pub n_samples: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            map: None,
            method: Method::Evoi {
                threshold: DEFAULT_THRESHOLD,
            },
            beta: 10.0,
            seed: 0,
            true_goal: None,
            hypotheses: None,
            prior: None,
            n_samples: DEFAULT_PAIR_SAMPLES,
        }
    }
}

impl SessionConfig {
    pub fn for_map(map: impl Into<String>) -> Self {
        Self {
            map: Some(map.into()),
            ..Self::default()
        }
    }

    /// The world this config plays in, given the solved map.
    pub fn world(&self, base: &Arc<GridEnv>) -> Result<Arc<GridEnv>, SessionError> {
        match &self.hypotheses {
            None => Ok(Arc::clone(base)),
            Some(goals) => Ok(Arc::new(GridEnv::clone(base).with_hypotheses(goals)?)),
        }
    }

    /// Episode settings for `world`. The simulated expert mode is unused
    /// because a human answers.
    pub fn episode_config(&self, world: &GridEnv) -> Result<EpisodeConfig, SessionError> {
        let true_task = match self.true_goal {
            None => None,
            Some(goal) => Some(task_of(world, goal).ok_or_else(|| {
                SessionError::Config(format!("true goal {goal} is not a hypothesis"))
            })?),
        };
        let mut cfg = EpisodeConfig::new(self.method, self.seed);
        cfg.beta = self.beta;
        cfg.true_task = true_task;
        cfg.prior = self.prior.clone();
        cfg.n_samples = self.n_samples;
        Ok(cfg)
    }
}

fn task_of(world: &GridEnv, goal: Pos) -> Option<TaskId> {
    (0..world.q().num_tasks())
        .map(TaskId)
        .find(|&t| world.goal(t) == goal)
}

type LiveEpisode<'a> = Episode<'a, GridEnv>;

self_cell::self_cell!(
    struct Live {
        owner: Arc<GridEnv>,
        #[covariant]
        dependent: LiveEpisode,
    }
);

/// A live episode plus its event transcript.
///
/// At most one query is pending, and no environment step happens while
/// one is.
pub struct Session {
    id: String,
    config: SessionConfig,
    live: Live,
    seq: u64,
    answers: Vec<Choice>,
    transcript: Vec<WireEvent>,
}

impl Session {
    /// Opens a session on `base` and returns the initial state update.
    pub fn new(
        id: impl Into<String>,
        config: SessionConfig,
        base: &Arc<GridEnv>,
    ) -> Result<(Self, Vec<WireEvent>), SessionError> {
        let world = config.world(base)?;
        let episode_cfg = config.episode_config(&world)?;
        let live = Live::try_new(world, |w| Episode::new(w.as_ref(), &episode_cfg))?;
        let mut session = Self {
            id: id.into(),
            config,
            live,
            seq: 0,
            answers: Vec::new(),
            transcript: Vec::new(),
        };
        let update = session.state_update(Cause::Start, None);
        let events = session.emit(vec![update]);
        Ok((session, events))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn world(&self) -> &GridEnv {
        self.live.borrow_owner()
    }

    pub fn episode(&self) -> &Episode<'_, GridEnv> {
        self.live.borrow_dependent()
    }

    /// The episode settings an offline replay needs.
    pub fn episode_config(&self) -> EpisodeConfig {
        let mut cfg = self
            .config
            .episode_config(self.world())
            .expect("validated at creation");
        cfg.true_task = Some(self.episode().true_task());
        cfg
    }

    pub fn answers(&self) -> &[Choice] {
        &self.answers
    }

    pub fn transcript(&self) -> &[WireEvent] {
        &self.transcript
    }

    pub fn is_pending(&self) -> bool {
        self.episode().phase() == Phase::Pending
    }

    pub fn is_finished(&self) -> bool {
        self.episode().is_finished()
    }

    pub fn result(&self) -> EpisodeResult {
        self.episode().result()
    }

    /// Runs one decision: poses a query, or takes an action.
    pub fn advance(&mut self) -> Result<Vec<WireEvent>, SessionError> {
        match self.episode().phase() {
            Phase::Finished => Err(SessionError::EpisodeOver),
            Phase::Pending => Err(SessionError::PendingQuery),
            Phase::Acting => self.act(),
            Phase::Deciding => {
                let posed = self.live.with_dependent_mut(|_, ep| ep.decide())?;
                match posed {
                    Some(_) => {
                        let query = self.query_posed();
                        Ok(self.emit(vec![query]))
                    }
                    None => self.act(),
                }
            }
        }
    }

    /// Advances until a query is posed or the episode ends.
    pub fn run(&mut self) -> Result<Vec<WireEvent>, SessionError> {
        let mut events = self.advance()?;
        while !self.is_pending() && !self.is_finished() {
            events.extend(self.advance()?);
        }
        Ok(events)
    }

    /// Answers the pending query and reports the updated belief.
    pub fn submit_response(&mut self, choice: Choice) -> Result<Vec<WireEvent>, SessionError> {
        match self.episode().phase() {
            Phase::Pending => {}
            Phase::Finished => return Err(SessionError::EpisodeOver),
            _ => return Err(SessionError::NoPendingQuery),
        }
        self.live.with_dependent_mut(|_, ep| ep.answer(choice))?;
        self.answers.push(choice);
        let update = self.state_update(Cause::Answer, None);
        Ok(self.emit(vec![update]))
    }

    /// [`Session::submit_response`] with a wire label.
    pub fn submit_label(&mut self, label: &str) -> Result<Vec<WireEvent>, SessionError> {
        let choice = parse_choice(label)?;
        self.submit_response(choice)
    }

    fn act(&mut self) -> Result<Vec<WireEvent>, SessionError> {
        let step = self.live.with_dependent_mut(|_, ep| ep.act())?;
        let label = match step.action {
            EnvAction::Grid(a) => a.label().to_string(),
            EnvAction::Point(_) => unreachable!("grid sessions only"),
        };
        let mut events = vec![self.state_update(Cause::Action, Some((label, step.reward)))];
        if self.is_finished() {
            events.push(EventBody::EpisodeEnd(EpisodeEnd {
                metrics: self.metrics(),
                true_goal: self.world().goal(self.episode().true_task()),
                answers: self.answers.clone(),
            }));
        }
        Ok(self.emit(events))
    }

    fn emit(&mut self, bodies: Vec<EventBody>) -> Vec<WireEvent> {
        let events: Vec<WireEvent> = bodies
            .into_iter()
            .map(|body| {
                let event = WireEvent {
                    v: PROTOCOL_VERSION,
                    session: self.id.clone(),
                    seq: self.seq,
                    body,
                };
                self.seq += 1;
                event
            })
            .collect();
        self.transcript.extend(events.iter().cloned());
        events
    }

    fn metrics(&self) -> Metrics {
        let ep = self.episode();
        Metrics {
            steps: ep.steps(),
            n_queries: ep.n_queries(),
            n_repetitive: ep.n_repetitive(),
            score: ep.score(),
            reached_goal: ep.reached_goal(),
        }
    }

    fn state_update(&self, cause: Cause, last: Option<(String, f64)>) -> EventBody {
        let (last_action, reward) = match last {
            Some((l, r)) => (Some(l), Some(r)),
            None => (None, None),
        };
        EventBody::StateUpdate(StateUpdate {
            cause,
            agent: pose(self.episode().state()),
            last_action,
            reward,
            grid: self.snapshot(),
            belief: self.belief_summary(),
            metrics: self.metrics(),
        })
    }

    fn snapshot(&self) -> GridSnapshot {
        let world = self.world();
        let map = world.map();
        let rows = (0..map.height())
            .map(|r| {
                (0..map.width())
                    .map(|c| match map.cell(Pos::new(r, c)) {
                        Cell::Empty => '.',
                        Cell::Wall => '#',
                        Cell::Lava => 'L',
                    })
                    .collect()
            })
            .collect();
        GridSnapshot {
            map: world.name().to_string(),
            width: map.width(),
            height: map.height(),
            rows,
            goals: goals(world),
            true_goal: world.goal(self.episode().true_task()),
        }
    }

    fn belief_summary(&self) -> BeliefSummary {
        let world = self.world();
        let belief = self.episode().belief();
        let mass = belief.weights();
        let mut order: Vec<usize> = (0..mass.len()).collect();
        order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
        let top = order
            .into_iter()
            .take(3)
            .map(|i| GoalMass {
                task: i,
                goal: world.goal(TaskId(i)),
                mass: mass[i],
            })
            .collect();
        BeliefSummary {
            entropy: belief.entropy(),
            top,
            mass,
        }
    }

    fn query_posed(&self) -> EventBody {
        let ep = self.episode();
        let pair = ep.pending().expect("a query was just posed");
        let state = ep.state();
        let option = |choice: Choice, action: GridAction| QueryOption {
            choice,
            action,
            label: action.label().to_string(),
            preview: self.preview(state, action),
        };
        EventBody::QueryPosed(QueryPosed {
            step: ep.steps(),
            agent: pose(state),
            options: [
                option(Choice::First, pair.first),
                option(Choice::Second, pair.second),
            ],
        })
    }

    fn preview(&self, state: &GridState, action: GridAction) -> Pose {
        let world = self.world();
        let task = GridTask {
            goal: world.goal(self.episode().true_task()),
        };
        pose(&gridworld::step(world.map(), state, action, &task, &world.params()).next)
    }
}

fn goals(world: &GridEnv) -> Vec<Pos> {
    (0..world.q().num_tasks())
        .map(|t| world.goal(TaskId(t)))
        .collect()
}

fn pose(state: &GridState) -> Pose {
    Pose {
        row: state.pos.row,
        col: state.pos.col,
        dir: state.dir,
    }
}
