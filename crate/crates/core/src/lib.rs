//! Deciding when to ask a human expert a pairwise preference question.
//!
//! An agent that does not know which task it is solving keeps a posterior
//! over task hypotheses, asks "which of these two actions would you take?"
//! only when the expected gain in value from the answer exceeds a cost, and
//! otherwise acts greedily under its belief.
//!
//! - [`belief`]: response model, posterior, Q-source traits
//! - [`evoi`]: value-of-information query selection
//! - [`baselines`]: random and variance-triggered queriers
//! - [`gridworld`], [`pointgoal`]: environments with exact Q functions
//! - [`expert`]: simulated expert
//! - [`harness`]: episodes, sweeps, CSV output

pub mod baselines;
pub mod belief;
pub mod evoi;
pub mod exec;
pub mod expert;
pub mod gridworld;
pub mod harness;
pub mod pointgoal;
