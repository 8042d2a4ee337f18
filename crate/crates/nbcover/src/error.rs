use thiserror::Error;

/// Errors raised while building, parsing, or checking preconditions on protocols.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing protocol header")]
    MissingHeader,
    #[error("missing init")]
    MissingInit,
    #[error("line {line}: duplicate init")]
    DuplicateInit { line: usize },
    #[error("line {line}: duplicate transition")]
    DuplicateTransition { line: usize },
    #[error("empty transition set")]
    NoTransitions,
    #[error("message name {0} collides with a normalized tau message")]
    TauCollision(String),
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("protocol is not wait-only (offending states: {})", .0.join(", "))]
    NotWaitOnly(Vec<String>),
    #[error("initial state {0} is a waiting state")]
    InitialWaiting(String),
    #[error("protocol has a broadcast of message {0}, which some state receives")]
    ReceivedBroadcast(String),
    #[error("invalid configuration: {0}")]
    Configuration(String),
}

/// A replayed step that is not a legal move of the semantics.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {index}: {reason}")]
pub struct ReplayError {
    pub index: usize,
    pub reason: String,
}
