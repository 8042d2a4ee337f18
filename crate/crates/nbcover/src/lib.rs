//! Coverability for parameterized networks of identical processes that
//! communicate by broadcast and non-blocking rendez-vous.
//!
//! - [`protocol`]: protocols, the text format, classification.
//! - [`semantics`]: the concrete step relation, replay, bounded exploration.
//! - [`state_cover`]: state coverability for wait-only protocols.
//! - [`conf_cover`]: configuration coverability over abstract configurations.
//! - [`tokenset`]: configuration coverability for wait-only rendez-vous protocols.
//! - [`reductions`]: circuit and DFA reductions, random protocols.

pub mod conf_cover;
pub mod config;
pub mod error;
mod parse;
pub mod protocol;
pub mod reductions;
pub mod semantics;
pub mod state_cover;
pub mod tokenset;

pub use config::Configuration;
pub use error::{ProtocolError, ReplayError};
pub use parse::parse_protocol;
pub use protocol::{
    classify, receivable, ClassificationReport, Label, MsgId, Protocol, ProtocolBuilder, StateId,
    StateSet, TransId, Transition,
};
pub use semantics::{
    cover_query, explore, monotone_lift, replay, successors, CoverVerdict, ExecutionScript, Limits,
    ReachSet, Receivers, ScriptStep, StepKind, StepOutcome,
};

/// Normalizes internal transitions into broadcasts of fresh messages.
pub fn normalize_tau(p: &Protocol) -> Protocol {
    p.normalize_tau()
}
