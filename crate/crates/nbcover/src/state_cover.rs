//! State coverability for wait-only protocols by saturation, with witnesses.

use std::collections::HashMap;

use crate::config::Configuration;
use crate::error::ProtocolError;
use crate::protocol::{require_wait_only, Label, Protocol, StateId, StateSet, TransId};
use crate::semantics::{canonical_step, lift_run, replay, ExecutionScript};

/// Why a state entered the saturation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Justification {
    Initial,
    /// Target of an action (send, broadcast, or internal) from a covered state.
    Action { transition: TransId },
    /// Target of a reception answered by a send from a covered state.
    RendezVousPair { send: TransId, reception: TransId },
    /// Target of a reception answered by a broadcast from a covered state.
    BroadcastPair { broadcast: TransId, reception: TransId },
}

impl Justification {
    pub fn rule_name(&self) -> &'static str {
        match self {
            Justification::Initial => "initial",
            Justification::Action { .. } => "action-step",
            Justification::RendezVousPair { .. } => "send-rendezvous pair",
            Justification::BroadcastPair { .. } => "broadcast pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub round: usize,
    pub added: Vec<(StateId, Justification)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaturationResult {
    pub coverable: StateSet,
    /// Rounds `1..`, each with at least one addition.
    pub rounds: Vec<Round>,
    /// Upper bound on the processes needed to cover each state.
    pub per_state_bound: Vec<Option<u64>>,
    pub justification: Vec<Option<Justification>>,
    pub round_of: Vec<Option<usize>>,
}

impl SaturationResult {
    /// `S_i`, the states added in rounds `0..=i`.
    pub fn set_at(&self, i: usize) -> StateSet {
        let mut s = StateSet::with_capacity(self.coverable.len());
        for (q, r) in self.round_of.iter().enumerate() {
            if r.is_some_and(|r| r <= i) {
                s.insert(q);
            }
        }
        s
    }
}

/// Lowest-keyed justification for each state newly derivable from `s`.
fn next_round(p: &Protocol, s: &StateSet) -> Vec<(StateId, Justification)> {
    let mut found: Vec<Option<Justification>> = vec![None; p.num_states()];
    let mut note = |q: StateId, j: Justification| {
        if !s.contains(q) && found[q].is_none() {
            found[q] = Some(j);
        }
    };
    for (t, tr) in p.transitions().iter().enumerate() {
        if s.contains(tr.source) && !tr.label.is_receive() {
            note(tr.destination, Justification::Action { transition: t });
        }
    }
    for rule in [0, 1] {
        for (t, tr) in p.transitions().iter().enumerate() {
            let m = match (rule, tr.label) {
                (0, Label::Send(m)) | (1, Label::Broadcast(m)) => m,
                _ => continue,
            };
            if !s.contains(tr.source) {
                continue;
            }
            for q2 in s.ones() {
                if q2 == tr.source {
                    continue;
                }
                for &r in p.receptions(q2, m) {
                    let j = if rule == 0 {
                        Justification::RendezVousPair {
                            send: t,
                            reception: r,
                        }
                    } else {
                        Justification::BroadcastPair {
                            broadcast: t,
                            reception: r,
                        }
                    };
                    note(p.transition(r).destination, j);
                }
            }
        }
    }
    found
        .into_iter()
        .enumerate()
        .filter_map(|(q, j)| j.map(|j| (q, j)))
        .collect()
}

/// Computes the saturation fixpoint with its derivation.
pub fn saturate(p: &Protocol) -> Result<SaturationResult, ProtocolError> {
    require_wait_only(p)?;
    let n = p.num_states();
    let mut res = SaturationResult {
        coverable: p.empty_set(),
        rounds: Vec::new(),
        per_state_bound: vec![None; n],
        justification: vec![None; n],
        round_of: vec![None; n],
    };
    let q0 = p.initial();
    res.coverable.insert(q0);
    res.per_state_bound[q0] = Some(1);
    res.justification[q0] = Some(Justification::Initial);
    res.round_of[q0] = Some(0);
    loop {
        let added = next_round(p, &res.coverable);
        if added.is_empty() {
            return Ok(res);
        }
        let round = res.rounds.len() + 1;
        for &(q, j) in &added {
            let bound = |x: StateId| res.per_state_bound[x].expect("earlier round");
            let b = match j {
                Justification::Initial => 1,
                Justification::Action { transition } => bound(p.transition(transition).source),
                Justification::RendezVousPair { send: t, reception: r }
                | Justification::BroadcastPair { broadcast: t, reception: r } => bound(
                    p.transition(t).source,
                )
                .saturating_add(bound(p.transition(r).source)),
            };
            res.per_state_bound[q] = Some(b);
        }
        for &(q, j) in &added {
            res.coverable.insert(q);
            res.justification[q] = Some(j);
            res.round_of[q] = Some(round);
        }
        res.rounds.push(Round { round, added });
    }
}

/// Answer to a single state-coverability query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateCoverAnswer {
    pub coverable: bool,
    pub bound: Option<u64>,
}

pub fn is_state_coverable(p: &Protocol, q: &str) -> Result<StateCoverAnswer, ProtocolError> {
    let q = p.require_state(q)?;
    let sat = saturate(p)?;
    Ok(StateCoverAnswer {
        coverable: sat.coverable.contains(q),
        bound: sat.per_state_bound[q],
    })
}

/// Builds replayable witnesses by recursing on the derivation.
pub struct WitnessBuilder<'a> {
    p: &'a Protocol,
    sat: &'a SaturationResult,
    memo: HashMap<StateId, ExecutionScript>,
}

impl<'a> WitnessBuilder<'a> {
    pub fn new(p: &'a Protocol, sat: &'a SaturationResult) -> Self {
        WitnessBuilder {
            p,
            sat,
            memo: HashMap::new(),
        }
    }

    fn final_config(&self, w: &ExecutionScript) -> Configuration {
        replay(self.p, w)
            .expect("witnesses replay")
            .pop()
            .expect("non-empty trace")
    }

    /// A script covering `q`, or `None` if `q` is not coverable.
    pub fn witness(&mut self, q: StateId) -> Option<ExecutionScript> {
        if let Some(w) = self.memo.get(&q) {
            return Some(w.clone());
        }
        let p = self.p;
        let w = match self.sat.justification[q]? {
            Justification::Initial => ExecutionScript::empty(1),
            Justification::Action { transition } => {
                let mut w = self.witness(p.transition(transition).source)?;
                let c = self.final_config(&w);
                w.steps.push(canonical_step(p, &c, transition, None)?);
                w
            }
            Justification::RendezVousPair { send: t, reception: r }
            | Justification::BroadcastPair { broadcast: t, reception: r } => {
                let q1 = p.transition(t).source;
                let q2 = p.transition(r).source;
                let w2 = self.witness(q2)?;
                let n2 = w2.initial_size;
                let c2 = Configuration::uniform(p.initial(), n2);
                // Run the sender's witness first (unless the sender is q_in),
                // with the receiver's processes idling on q_in, then the
                // receiver's witness next to the now-idle sender.
                let (mut steps, d1, n) = if q1 == p.initial() {
                    let n = n2 + 1;
                    (Vec::new(), Configuration::uniform(p.initial(), n), n)
                } else {
                    let w1 = self.witness(q1)?;
                    let n = w1.initial_size + n2;
                    let d0 = Configuration::uniform(p.initial(), n);
                    let c1 = Configuration::uniform(p.initial(), w1.initial_size);
                    let (s1, trace) = lift_run(p, &c1, &w1.steps, &d0).ok()?;
                    (s1, trace.last().unwrap().clone(), n)
                };
                let (s2, trace) = lift_run(p, &c2, &w2.steps, &d1).ok()?;
                steps.extend(s2);
                let d2 = trace.last().unwrap();
                steps.push(canonical_step(p, d2, t, Some(r))?);
                ExecutionScript {
                    initial_size: n,
                    steps,
                }
            }
        };
        let c = self.final_config(&w);
        if c.get(q) == 0 {
            return None;
        }
        self.memo.insert(q, w.clone());
        Some(w)
    }
}

/// A replay-verified script covering `q`.
pub fn witness_execution(p: &Protocol, q: &str) -> Result<ExecutionScript, ProtocolError> {
    let qid = p.require_state(q)?;
    let sat = saturate(p)?;
    if !sat.coverable.contains(qid) {
        return Err(ProtocolError::Configuration(format!("{q} is not coverable")));
    }
    WitnessBuilder::new(p, &sat)
        .witness(qid)
        .ok_or_else(|| ProtocolError::Configuration(format!("no witness assembled for {q}")))
}
