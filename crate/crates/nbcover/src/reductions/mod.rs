//! Protocol generators: circuit-value and DFA-intersection reductions with
//! their ground-truth oracles, and seeded random wait-only protocols.

mod cvp;
mod dfa;
mod random;

pub use cvp::{
    cvp_to_protocol, cvp_to_rdv_protocol, eval_circuit, parse_circuit, random_circuit, Circuit,
    Gate, GateOp,
};
pub use dfa::{
    dfa_intersection_nonempty, dfa_intersection_to_protocol, parse_dfa_set, random_dfa_set, Dfa,
    DfaSet,
};
pub use random::{random_protocol, RandomParams};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn syntax(line: usize, message: impl Into<String>) -> ReductionError {
    ReductionError::Syntax {
        line,
        message: message.into(),
    }
}
