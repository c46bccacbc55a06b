//! The round-based labeling loop: bootstrap from seed users, train, score
//! the pool, queue the top K for annotators, merge agreed labels, repeat.
//!
//! [`state::RoundState`] is a pure state machine driven by
//! [`state::Event`]s. [`service::Service`] serializes writes, persists each
//! event to an append-only log before publishing it and recovers from the
//! log on restart. [`http`] exposes it to the labeling UI.

pub mod export;
pub mod http;
pub mod eventlog;
pub mod service;
pub mod sim;
pub mod state;

pub use export::{export, Export, Manifest};
pub use service::{recover_state, Service};
pub use state::{Annotation, Event, HitlConfig, MergeOutcome, MergeStatus, Provenance, QueueItem, RoundState, Verdict};
