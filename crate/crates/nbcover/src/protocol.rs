//! Protocols: states, messages, labelled transitions, and their static structure.

use std::collections::HashMap;
use std::fmt;

use fixedbitset::FixedBitSet;

use crate::error::ProtocolError;

/// Index of a state in [`Protocol::states`].
pub type StateId = usize;
/// Index of a message in [`Protocol::messages`].
pub type MsgId = usize;
/// Index of a transition in [`Protocol::transitions`].
pub type TransId = usize;

/// A set of states, indexed by [`StateId`].
pub type StateSet = FixedBitSet;

/// Transition label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// `!!m`: received by every process able to receive `m`.
    Broadcast(MsgId),
    /// `!m`: received by at most one process.
    Send(MsgId),
    /// `?m`.
    Receive(MsgId),
    /// `tau`.
    Internal,
}

impl Label {
    pub fn message(self) -> Option<MsgId> {
        match self {
            Label::Broadcast(m) | Label::Send(m) | Label::Receive(m) => Some(m),
            Label::Internal => None,
        }
    }

    pub fn is_receive(self) -> bool {
        matches!(self, Label::Receive(_))
    }

    /// Prefix used in the text format (`!!`, `!`, `?`, or `tau`).
    pub fn symbol(self) -> &'static str {
        match self {
            Label::Broadcast(_) => "!!",
            Label::Send(_) => "!",
            Label::Receive(_) => "?",
            Label::Internal => "tau",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub source: StateId,
    pub label: Label,
    pub destination: StateId,
}

/// An immutable protocol `(Q, Σ, q_in, T)` with precomputed reception indexes.
#[derive(Debug, Clone)]
pub struct Protocol {
    name: String,
    states: Vec<String>,
    messages: Vec<String>,
    initial: StateId,
    transitions: Vec<Transition>,
    state_index: HashMap<String, StateId>,
    message_index: HashMap<String, MsgId>,
    /// `receptions[q][m]` lists the reception transitions `(q, ?m, _)`.
    receptions: Vec<Vec<Vec<TransId>>>,
}

impl PartialEq for Protocol {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.states == other.states
            && self.messages == other.messages
            && self.initial == other.initial
            && self.transitions == other.transitions
    }
}

impl Eq for Protocol {}

impl Protocol {
    pub fn builder(name: impl Into<String>, initial: impl Into<String>) -> ProtocolBuilder {
        ProtocolBuilder::new(name, initial)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn messages(&self) -> &[String] {
        &self.messages
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, t: TransId) -> &Transition {
        &self.transitions[t]
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_messages(&self) -> usize {
        self.messages.len()
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q]
    }

    pub fn message_name(&self, m: MsgId) -> &str {
        &self.messages[m]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_index.get(name).copied()
    }

    pub fn message_id(&self, name: &str) -> Option<MsgId> {
        self.message_index.get(name).copied()
    }

    /// Looks up a state, reporting unknown names as errors.
    pub fn require_state(&self, name: &str) -> Result<StateId, ProtocolError> {
        self.state_id(name)
            .ok_or_else(|| ProtocolError::UnknownState(name.to_string()))
    }

    /// An empty state set sized for this protocol.
    pub fn empty_set(&self) -> StateSet {
        FixedBitSet::with_capacity(self.states.len())
    }

    /// Reception transitions `(q, ?m, _)`.
    pub fn receptions(&self, q: StateId, m: MsgId) -> &[TransId] {
        &self.receptions[q][m]
    }

    /// Whether `m ∈ R(q)`.
    pub fn can_receive(&self, q: StateId, m: MsgId) -> bool {
        !self.receptions[q][m].is_empty()
    }

    /// `R(q)`: the messages `q` has an outgoing reception for.
    pub fn receivable(&self, q: StateId) -> Vec<MsgId> {
        (0..self.messages.len())
            .filter(|&m| self.can_receive(q, m))
            .collect()
    }

    /// Whether some state can receive `m`.
    pub fn is_received(&self, m: MsgId) -> bool {
        (0..self.states.len()).any(|q| self.can_receive(q, m))
    }

    /// Renders a transition as a line of the text format.
    pub fn transition_text(&self, t: &Transition) -> String {
        let src = self.state_name(t.source);
        let dst = self.state_name(t.destination);
        match t.label.message() {
            Some(m) => format!("{src} {}{} {dst}", t.label.symbol(), self.message_name(m)),
            None => format!("{src} tau {dst}"),
        }
    }

    /// Renders the protocol in the canonical text form accepted by
    /// [`crate::parse_protocol`].
    pub fn render(&self) -> String {
        let mut out = format!(
            "protocol {}\ninit {}\n",
            self.name,
            self.state_name(self.initial)
        );
        for t in &self.transitions {
            out.push_str(&self.transition_text(t));
            out.push('\n');
        }
        out
    }

    /// Replaces every internal transition `k` by a broadcast of the fresh,
    /// never-received message `__tau_<k>`.
    pub fn normalize_tau(&self) -> Protocol {
        if !self.transitions.iter().any(|t| t.label == Label::Internal) {
            return self.clone();
        }
        let mut b = ProtocolBuilder::new(self.name.clone(), self.state_name(self.initial));
        for s in &self.states {
            b.state(s);
        }
        for m in &self.messages {
            b.message(m);
        }
        for (k, t) in self.transitions.iter().enumerate() {
            let src = self.state_name(t.source);
            let dst = self.state_name(t.destination);
            match t.label.message() {
                Some(m) => b.add(src, t.label.symbol(), Some(self.message_name(m)), dst),
                None => b.add(src, "!!", Some(&tau_message(k)), dst),
            };
        }
        b.finish()
            .expect("normalizing a valid protocol yields a valid protocol")
    }

    pub fn has_internal(&self) -> bool {
        self.transitions.iter().any(|t| t.label == Label::Internal)
    }

    /// Formats a state set as `{a, b, c}` in state order.
    pub fn format_set(&self, set: &StateSet) -> String {
        let names: Vec<&str> = set.ones().map(|q| self.state_name(q)).collect();
        format!("{{{}}}", names.join(", "))
    }

    /// State names of a set, in state order.
    pub fn set_names(&self, set: &StateSet) -> Vec<String> {
        set.ones().map(|q| self.state_name(q).to_string()).collect()
    }
}

/// Fresh message name used when normalizing internal transition `k`.
pub fn tau_message(k: TransId) -> String {
    format!("__tau_{k}")
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Incremental protocol construction; states and messages are numbered in
/// order of first appearance, the initial state first.
#[derive(Debug, Clone)]
pub struct ProtocolBuilder {
    name: String,
    states: Vec<String>,
    messages: Vec<String>,
    state_index: HashMap<String, StateId>,
    message_index: HashMap<String, MsgId>,
    transitions: Vec<Transition>,
}

impl ProtocolBuilder {
    pub fn new(name: impl Into<String>, initial: impl Into<String>) -> Self {
        let mut b = ProtocolBuilder {
            name: name.into(),
            states: Vec::new(),
            messages: Vec::new(),
            state_index: HashMap::new(),
            message_index: HashMap::new(),
            transitions: Vec::new(),
        };
        b.state(&initial.into());
        b
    }

    pub fn state(&mut self, name: &str) -> StateId {
        if let Some(&q) = self.state_index.get(name) {
            return q;
        }
        self.states.push(name.to_string());
        self.state_index.insert(name.to_string(), self.states.len() - 1);
        self.states.len() - 1
    }

    pub fn message(&mut self, name: &str) -> MsgId {
        if let Some(&m) = self.message_index.get(name) {
            return m;
        }
        self.messages.push(name.to_string());
        self.message_index.insert(name.to_string(), self.messages.len() - 1);
        self.messages.len() - 1
    }

    /// Adds a transition given by its text-format pieces (`symbol` is one of
    /// `!!`, `!`, `?`, `tau`). Returns `false` if it was already present.
    pub fn add(&mut self, src: &str, symbol: &str, msg: Option<&str>, dst: &str) -> bool {
        let source = self.state(src);
        let label = match (symbol, msg) {
            ("tau", _) => Label::Internal,
            ("!!", Some(m)) => Label::Broadcast(self.message(m)),
            ("!", Some(m)) => Label::Send(self.message(m)),
            ("?", Some(m)) => Label::Receive(self.message(m)),
            _ => panic!("invalid label symbol {symbol:?}"),
        };
        let destination = self.state(dst);
        self.push(Transition {
            source,
            label,
            destination,
        })
    }

    pub fn broadcast(&mut self, src: &str, msg: &str, dst: &str) -> bool {
        self.add(src, "!!", Some(msg), dst)
    }

    pub fn send(&mut self, src: &str, msg: &str, dst: &str) -> bool {
        self.add(src, "!", Some(msg), dst)
    }

    pub fn receive(&mut self, src: &str, msg: &str, dst: &str) -> bool {
        self.add(src, "?", Some(msg), dst)
    }

    pub fn internal(&mut self, src: &str, dst: &str) -> bool {
        self.add(src, "tau", None, dst)
    }

    /// Adds a transition over already-registered ids.
    pub fn push(&mut self, t: Transition) -> bool {
        if self.transitions.contains(&t) {
            return false;
        }
        self.transitions.push(t);
        true
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn finish(self) -> Result<Protocol, ProtocolError> {
        if self.transitions.is_empty() {
            return Err(ProtocolError::NoTransitions);
        }
        for (k, t) in self.transitions.iter().enumerate() {
            if t.label == Label::Internal && self.message_index.contains_key(&tau_message(k)) {
                return Err(ProtocolError::TauCollision(tau_message(k)));
            }
        }
        let mut receptions = vec![vec![Vec::new(); self.messages.len()]; self.states.len()];
        for (k, t) in self.transitions.iter().enumerate() {
            if let Label::Receive(m) = t.label {
                receptions[t.source][m].push(k);
            }
        }
        Ok(Protocol {
            name: self.name,
            states: self.states,
            messages: self.messages,
            initial: 0,
            transitions: self.transitions,
            state_index: self.state_index,
            message_index: self.message_index,
            receptions,
        })
    }
}

/// Structural classification of a protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationReport {
    pub wait_only: bool,
    /// States without outgoing receptions.
    pub action_states: StateSet,
    /// States with receptions and no other outgoing transition.
    pub waiting_states: StateSet,
    /// States with both receptions and actions.
    pub offending_states: StateSet,
    pub rdv_only: bool,
    pub broadcast_only: bool,
    pub initial_is_action: bool,
}

pub fn classify(p: &Protocol) -> ClassificationReport {
    let n = p.num_states();
    let mut receives = FixedBitSet::with_capacity(n);
    let mut acts = FixedBitSet::with_capacity(n);
    for t in p.transitions() {
        if t.label.is_receive() {
            receives.insert(t.source);
        } else {
            acts.insert(t.source);
        }
    }
    let mut action_states = FixedBitSet::with_capacity(n);
    action_states.insert_range(..);
    action_states.difference_with(&receives);
    let mut waiting_states = receives.clone();
    waiting_states.difference_with(&acts);
    let mut offending_states = receives.clone();
    offending_states.intersect_with(&acts);
    ClassificationReport {
        wait_only: offending_states.is_clear(),
        initial_is_action: action_states.contains(p.initial()),
        action_states,
        waiting_states,
        offending_states,
        rdv_only: !p
            .transitions()
            .iter()
            .any(|t| matches!(t.label, Label::Broadcast(_))),
        broadcast_only: !p
            .transitions()
            .iter()
            .any(|t| matches!(t.label, Label::Send(_))),
    }
}

/// `R(q)` by state name.
pub fn receivable(p: &Protocol, q: &str) -> Result<Vec<MsgId>, ProtocolError> {
    let q = p.require_state(q)?;
    Ok(p.receivable(q))
}

/// Checks the preconditions shared by the wait-only decision procedures.
pub fn require_wait_only(p: &Protocol) -> Result<ClassificationReport, ProtocolError> {
    let report = classify(p);
    if !report.wait_only {
        return Err(ProtocolError::NotWaitOnly(p.set_names(&report.offending_states)));
    }
    if !report.initial_is_action {
        return Err(ProtocolError::InitialWaiting(
            p.state_name(p.initial()).to_string(),
        ));
    }
    Ok(report)
}
