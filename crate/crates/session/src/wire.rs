//! Message types exchanged over the socket. `PROTOCOL.md` documents every
//! field; keep the two in sync.

use prefq_core::belief::Choice;
use prefq_core::gridworld::{Direction, GridAction, Pos};
use serde::{Deserialize, Serialize};

use crate::session::SessionConfig;

pub const PROTOCOL_VERSION: u32 = 1;

/// One event in a session's ordered stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub v: u32,
    pub session: String,
    /// Position in the session's stream, starting at 0 with no gaps.
    pub seq: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    StateUpdate(StateUpdate),
    QueryPosed(QueryPosed),
    EpisodeEnd(EpisodeEnd),
}

impl WireEvent {
    pub fn kind(&self) -> EventKind {
        match self.body {
            EventBody::StateUpdate(_) => EventKind::StateUpdate,
            EventBody::QueryPosed(_) => EventKind::QueryPosed,
            EventBody::EpisodeEnd(_) => EventKind::EpisodeEnd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    StateUpdate,
    QueryPosed,
    EpisodeEnd,
}

/// What triggered a state update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Start,
    Action,
    Answer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pose {
    pub row: usize,
    pub col: usize,
    pub dir: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSnapshot {
    pub map: String,
    pub width: usize,
    pub height: usize,
    /// One string per row: `.` empty, `#` wall, `L` lava.
    pub rows: Vec<String>,
    /// Goal hypotheses, indexed by task id.
    pub goals: Vec<Pos>,
    pub true_goal: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalMass {
    pub task: usize,
    pub goal: Pos,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    /// Shannon entropy in nats.
    pub entropy: f64,
    /// Up to three most likely goals, most likely first.
    pub top: Vec<GoalMass>,
    /// Posterior mass per goal hypothesis, aligned with `GridSnapshot::goals`.
    pub mass: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: usize,
    pub n_queries: usize,
    pub n_repetitive: usize,
    pub score: f64,
    pub reached_goal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateUpdate {
    pub cause: Cause,
    pub agent: Pose,
    /// Label of the action just taken, for `cause = action`.
    pub last_action: Option<String>,
    pub reward: Option<f64>,
    pub grid: GridSnapshot,
    pub belief: BeliefSummary,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryOption {
    pub choice: Choice,
    pub action: GridAction,
    pub label: String,
    /// Pose the agent would reach by taking this action.
    pub preview: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryPosed {
    pub step: usize,
    pub agent: Pose,
    pub options: [QueryOption; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEnd {
    pub metrics: Metrics,
    pub true_goal: Pos,
    /// Every answer given, in order; enough to replay the episode offline.
    pub answers: Vec<Choice>,
}

/// Requests a client may send.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Create {
        #[serde(default)]
        config: SessionConfig,
    },
    Advance,
    /// Advances until a query is posed or the episode ends.
    Run,
    Respond {
        choice: String,
    },
}

/// Client request with the optional protocol version it speaks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientEnvelope {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u32>,
    #[serde(flatten)]
    pub message: ClientMessage,
}

/// Replies that are not part of a session's event stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Control {
    Created { v: u32, session: String, hypotheses: usize },
    Error { v: u32, code: String, message: String },
}
