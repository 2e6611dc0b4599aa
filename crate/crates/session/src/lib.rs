//! Live episodes in which a human plays the expert.
//!
//! - [`session`]: the per-episode state machine (`advance`, `submit_response`).
//! - [`wire`]: versioned JSON messages; see `PROTOCOL.md`.
//! - [`manager`]: session registry with per-session locking.
//! - [`server`]: WebSocket endpoint and the read-only maps listing.

pub mod manager;
pub mod server;
pub mod session;
pub mod wire;

pub use manager::{shipped_maps, ManagerOptions, MapInfo, SessionManager};
pub use server::{router, run, serve};
pub use session::{parse_choice, Session, SessionConfig, SessionError, DEFAULT_THRESHOLD};
pub use wire::{
    Cause, ClientEnvelope, ClientMessage, Control, EventBody, EventKind, WireEvent,
    PROTOCOL_VERSION,
};
