//! Token-sets for wait-only rendez-vous protocols: the operator `F`, its
//! fixpoint, and coverability by membership.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::config::Configuration;
use crate::error::ProtocolError;
use crate::protocol::{require_wait_only, Label, MsgId, Protocol, StateId, StateSet, TransId};

/// `(S, Toks)`: unbounded states plus single-occupancy `(state, message)` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSet {
    pub s_part: StateSet,
    pub toks: BTreeSet<(StateId, MsgId)>,
}

impl TokenSet {
    /// `({q_in}, ∅)`.
    pub fn initial(p: &Protocol) -> Self {
        let mut s = p.empty_set();
        s.insert(p.initial());
        TokenSet {
            s_part: s,
            toks: BTreeSet::new(),
        }
    }

    /// Builds a token-set from state and message names.
    pub fn from_names(
        p: &Protocol,
        states: &[&str],
        toks: &[(&str, &str)],
    ) -> Result<Self, ProtocolError> {
        let mut s = p.empty_set();
        for q in states {
            s.insert(p.require_state(q)?);
        }
        let mut t = BTreeSet::new();
        for (q, m) in toks {
            let m = p
                .message_id(m)
                .ok_or_else(|| ProtocolError::Configuration(format!("unknown message {m}")))?;
            t.insert((p.require_state(q)?, m));
        }
        Ok(TokenSet { s_part: s, toks: t })
    }

    /// `st(Toks)`.
    pub fn token_states(&self) -> BTreeSet<StateId> {
        self.toks.iter().map(|&(q, _)| q).collect()
    }

    fn messages_of(&self, q: StateId) -> impl Iterator<Item = MsgId> + '_ {
        self.toks.range((q, 0)..=(q, MsgId::MAX)).map(|&(_, m)| m)
    }

    pub fn display(&self, p: &Protocol) -> String {
        let toks: Vec<String> = self
            .toks
            .iter()
            .map(|&(q, m)| format!("({},{})", p.state_name(q), p.message_name(m)))
            .collect();
        format!("({}, {{{}}})", p.format_set(&self.s_part), toks.join(", "))
    }

    pub fn to_json(&self, p: &Protocol) -> serde_json::Value {
        serde_json::json!({
            "S": p.set_names(&self.s_part),
            "Toks": self.toks.iter()
                .map(|&(q, m)| [p.state_name(q), p.message_name(m)])
                .collect::<Vec<_>>(),
        })
    }
}

/// A rule instance of `F` that added something.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// 2a: a send from `S` whose target joins `S''`.
    SendToS { send: TransId },
    /// 2b: a send from `S` whose target becomes a token.
    SendToToken { send: TransId },
    /// 3: a reception answered from `S`.
    Reception { reception: TransId },
    /// 4a: a reception from a token state whose target joins `S''`.
    TokenToS { reception: TransId, token: MsgId },
    /// 4b: a reception from a token state propagating the token.
    TokenStep { reception: TransId, token: MsgId },
    /// 6: promotion by two tokens.
    TwoTokens { promoted: (StateId, MsgId), other: (StateId, MsgId) },
    /// 7: promotion by three tokens linked by a reception.
    ThreeTokensLinked {
        promoted: (StateId, MsgId),
        second: (StateId, MsgId),
        third: (StateId, MsgId),
    },
    /// 8: promotion by three tokens with distinct messages.
    ThreeTokensCyclic {
        promoted: (StateId, MsgId),
        second: (StateId, MsgId),
        third: (StateId, MsgId),
    },
}

impl Rule {
    pub fn id(&self) -> &'static str {
        match self {
            Rule::SendToS { .. } => "2a",
            Rule::SendToToken { .. } => "2b",
            Rule::Reception { .. } => "3",
            Rule::TokenToS { .. } => "4a",
            Rule::TokenStep { .. } => "4b",
            Rule::TwoTokens { .. } => "6",
            Rule::ThreeTokensLinked { .. } => "7",
            Rule::ThreeTokensCyclic { .. } => "8",
        }
    }
}

/// A rule firing together with what it added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Firing {
    pub rule: Rule,
    pub added_state: Option<StateId>,
    pub added_token: Option<(StateId, MsgId)>,
}

impl Firing {
    pub fn describe(&self, p: &Protocol) -> String {
        let what = match (self.added_state, self.added_token) {
            (Some(q), _) => format!("state {}", p.state_name(q)),
            (_, Some((q, m))) => format!("token ({},{})", p.state_name(q), p.message_name(m)),
            _ => String::new(),
        };
        format!("rule {}: {}", self.rule.id(), what)
    }
}

/// One application of `F` with its intermediate sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FApplication {
    /// `(S'', Toks'')` from the first table.
    pub intermediate: TokenSet,
    /// `(S', Toks')`.
    pub result: TokenSet,
    pub firings: Vec<Firing>,
}

/// Sends as seen by the token-set rules: sends, internal moves, and broadcasts
/// of never-received messages. The message is `None` for internal moves.
fn sends(p: &Protocol) -> impl Iterator<Item = (TransId, StateId, Option<MsgId>, StateId)> + '_ {
    p.transitions()
        .iter()
        .enumerate()
        .filter_map(|(t, tr)| match tr.label {
            Label::Send(m) | Label::Broadcast(m) => Some((t, tr.source, Some(m), tr.destination)),
            Label::Internal => Some((t, tr.source, None, tr.destination)),
            Label::Receive(_) => None,
        })
}

/// Checks that the token-set procedure applies to `p`.
pub fn require_rdv(p: &Protocol) -> Result<(), ProtocolError> {
    require_wait_only(p)?;
    for tr in p.transitions() {
        if let Label::Broadcast(m) = tr.label {
            if p.is_received(m) {
                return Err(ProtocolError::ReceivedBroadcast(p.message_name(m).to_string()));
            }
        }
    }
    Ok(())
}

fn sendable_from(p: &Protocol, s: &StateSet, a: MsgId) -> bool {
    sends(p).any(|(_, src, m, _)| m == Some(a) && s.contains(src))
}

/// `q1` and `q2` are conflict-free in `γ`.
pub fn conflict_free(p: &Protocol, gamma: &TokenSet, q1: StateId, q2: StateId) -> bool {
    gamma.messages_of(q1).any(|m1| {
        gamma.messages_of(q2).any(|m2| {
            m1 != m2 && !p.can_receive(q2, m1) && !p.can_receive(q1, m2)
        })
    })
}

/// `conflict_free` with its preconditions checked.
pub fn conflict_free_checked(
    p: &Protocol,
    gamma: &TokenSet,
    q1: StateId,
    q2: StateId,
) -> Result<bool, ProtocolError> {
    let st = gamma.token_states();
    for q in [q1, q2] {
        if !st.contains(&q) {
            return Err(ProtocolError::Configuration(format!(
                "{} carries no token",
                p.state_name(q)
            )));
        }
    }
    if q1 == q2 {
        return Err(ProtocolError::Configuration(
            "conflict-freeness relates two distinct states".into(),
        ));
    }
    Ok(conflict_free(p, gamma, q1, q2))
}

/// `C ∈ ⟦γ⟧`.
pub fn respects(p: &Protocol, gamma: &TokenSet, c: &Configuration) -> bool {
    let st = gamma.token_states();
    let occupied_tokens: Vec<StateId> = c
        .support()
        .filter(|q| !gamma.s_part.contains(*q))
        .collect();
    occupied_tokens.iter().all(|&q| {
        st.contains(&q)
            && c.get(q) == 1
            && occupied_tokens
                .iter()
                .all(|&q2| q2 == q || conflict_free(p, gamma, q, q2))
    })
}

/// A failed consistency condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Condition (i): no justifying path for the token.
    Unjustified((StateId, MsgId)),
    /// Condition (ii): the pair is neither mutually received nor mutually unreceived.
    MixedPair((StateId, MsgId), (StateId, MsgId)),
    /// A token state also lies in `S`.
    Overlap(StateId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks both consistency conditions (and the disjointness invariant).
pub fn consistent(p: &Protocol, gamma: &TokenSet) -> ConsistencyReport {
    let mut violations = Vec::new();
    for q in gamma.token_states() {
        if gamma.s_part.contains(q) {
            violations.push(Violation::Overlap(q));
        }
    }
    // Justified pairs: (q, m) reachable by a send of m from S followed by
    // receptions of messages sendable from S.
    let n = p.num_states();
    let nm = p.num_messages();
    let mut seen = vec![false; n * nm];
    let mut queue = VecDeque::new();
    for (_, src, m, dst) in sends(p) {
        if let (true, Some(m)) = (gamma.s_part.contains(src), m) {
            if !seen[dst * nm + m] {
                seen[dst * nm + m] = true;
                queue.push_back((dst, m));
            }
        }
    }
    while let Some((q, m)) = queue.pop_front() {
        for tr in p.transitions().iter().filter(|tr| tr.source == q) {
            if let Label::Receive(b) = tr.label {
                if sendable_from(p, &gamma.s_part, b) && !seen[tr.destination * nm + m] {
                    seen[tr.destination * nm + m] = true;
                    queue.push_back((tr.destination, m));
                }
            }
        }
    }
    for &(q, m) in &gamma.toks {
        if !seen[q * nm + m] {
            violations.push(Violation::Unjustified((q, m)));
        }
    }
    let toks: Vec<_> = gamma.toks.iter().copied().collect();
    for (i, &(q, m)) in toks.iter().enumerate() {
        for &(q2, m2) in &toks[i + 1..] {
            if p.can_receive(q2, m) != p.can_receive(q, m2) {
                violations.push(Violation::MixedPair((q, m), (q2, m2)));
            }
        }
    }
    ConsistencyReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// One application of `F`. Every side condition refers to the input `γ`
/// (and, for promotions, to `Toks''`), so a single pass over the rules
/// computes the least sets.
pub fn apply_f(p: &Protocol, gamma: &TokenSet) -> FApplication {
    let s = &gamma.s_part;
    let mut s2 = s.clone();
    let mut toks2 = gamma.toks.clone();
    let mut firings = Vec::new();
    let add_state = |s2: &mut StateSet, q: StateId, rule: Rule, firings: &mut Vec<Firing>| {
        if !s2.put(q) {
            firings.push(Firing {
                rule,
                added_state: Some(q),
                added_token: None,
            });
        }
    };
    let add_token =
        |toks2: &mut BTreeSet<(StateId, MsgId)>, tok, rule: Rule, firings: &mut Vec<Firing>| {
            if toks2.insert(tok) {
                firings.push(Firing {
                    rule,
                    added_state: None,
                    added_token: Some(tok),
                });
            }
        };
    let received_from_s = |a: MsgId| s.ones().any(|q| p.can_receive(q, a));

    for (t, src, a, dst) in sends(p) {
        if !s.contains(src) {
            continue;
        }
        match a {
            Some(a) if p.can_receive(dst, a) && !received_from_s(a) => {
                add_token(&mut toks2, (dst, a), Rule::SendToToken { send: t }, &mut firings)
            }
            _ => add_state(&mut s2, dst, Rule::SendToS { send: t }, &mut firings),
        }
    }
    for (r, tr) in p.transitions().iter().enumerate() {
        let Label::Receive(a) = tr.label else { continue };
        if !sendable_from(p, s, a) {
            continue;
        }
        let (q, q2) = (tr.source, tr.destination);
        if s.contains(q) || gamma.toks.contains(&(q, a)) {
            add_state(&mut s2, q2, Rule::Reception { reception: r }, &mut firings);
        }
        for m in gamma.messages_of(q).filter(|&m| m != a).collect::<Vec<_>>() {
            if p.can_receive(q2, m) {
                add_token(
                    &mut toks2,
                    (q2, m),
                    Rule::TokenStep {
                        reception: r,
                        token: m,
                    },
                    &mut firings,
                );
            } else {
                add_state(
                    &mut s2,
                    q2,
                    Rule::TokenToS {
                        reception: r,
                        token: m,
                    },
                    &mut firings,
                );
            }
        }
    }
    let intermediate = TokenSet {
        s_part: s2.clone(),
        toks: toks2.clone(),
    };

    let toks: Vec<(StateId, MsgId)> = toks2.iter().copied().collect();
    let mut s3 = s2;
    for &(q1, m1) in &toks {
        if s3.contains(q1) {
            continue;
        }
        let rule6 = toks.iter().find(|&&(q2, m2)| {
            m1 != m2 && !p.can_receive(q1, m2) && p.can_receive(q2, m1)
        });
        if let Some(&other) = rule6 {
            add_state(
                &mut s3,
                q1,
                Rule::TwoTokens {
                    promoted: (q1, m1),
                    other,
                },
                &mut firings,
            );
            continue;
        }
        let rule7 = toks.iter().find_map(|&(q2, m2)| {
            if m1 == m2 {
                return None;
            }
            p.receptions(q2, m1).iter().find_map(|&r| {
                let q3 = p.transition(r).destination;
                toks2.contains(&(q3, m2)).then_some(((q2, m2), (q3, m2)))
            })
        });
        if let Some((second, third)) = rule7 {
            add_state(
                &mut s3,
                q1,
                Rule::ThreeTokensLinked {
                    promoted: (q1, m1),
                    second,
                    third,
                },
                &mut firings,
            );
            continue;
        }
        let rule8 = toks.iter().find_map(|&(q2, m2)| {
            if m2 == m1 || p.can_receive(q2, m1) || p.can_receive(q1, m2) {
                return None;
            }
            toks.iter()
                .find(|&&(q3, m3)| {
                    m3 != m1
                        && m3 != m2
                        && p.can_receive(q3, m1)
                        && p.can_receive(q3, m2)
                        && p.can_receive(q2, m3)
                        && p.can_receive(q1, m3)
                })
                .map(|&third| ((q2, m2), third))
        });
        if let Some((second, third)) = rule8 {
            add_state(
                &mut s3,
                q1,
                Rule::ThreeTokensCyclic {
                    promoted: (q1, m1),
                    second,
                    third,
                },
                &mut firings,
            );
        }
    }
    let toks3 = toks2.into_iter().filter(|&(q, _)| !s3.contains(q)).collect();
    FApplication {
        intermediate,
        result: TokenSet {
            s_part: s3,
            toks: toks3,
        },
        firings,
    }
}

/// `γ_0, γ_1 = F(γ_0), …` up to the first repetition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixpointTrace {
    /// `γ_0, …, γ_f` with `F(γ_f) = γ_f` (the repeated iterate is not duplicated).
    pub iterates: Vec<TokenSet>,
    /// `applications[i]` computes `iterates[i + 1]` (the last one maps `γ_f` to itself).
    pub applications: Vec<FApplication>,
}

impl FixpointTrace {
    pub fn last(&self) -> &TokenSet {
        self.iterates.last().expect("at least γ_0")
    }
}

/// The iteration cannot run longer than this: `S` grows at most `|Q|` times,
/// and between two growths `Toks` only grows.
pub fn iteration_bound(p: &Protocol) -> usize {
    let q = p.num_states();
    q * (q * p.num_messages() + 1) + 1
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixpointError {
    #[error(transparent)]
    Precondition(#[from] ProtocolError),
    #[error("token-set iteration exceeded {0} applications")]
    Diverged(usize),
}

pub fn fixpoint(p: &Protocol) -> Result<FixpointTrace, FixpointError> {
    require_rdv(p)?;
    let bound = iteration_bound(p);
    let mut trace = FixpointTrace {
        iterates: vec![TokenSet::initial(p)],
        applications: Vec::new(),
    };
    loop {
        let app = apply_f(p, trace.last());
        let done = app.result == *trace.last();
        let next = app.result.clone();
        trace.applications.push(app);
        if done {
            return Ok(trace);
        }
        if trace.applications.len() > bound {
            return Err(FixpointError::Diverged(bound));
        }
        trace.iterates.push(next);
    }
}

/// Is `c_f` coverable? Decided as membership in the fixpoint's interpretation.
pub fn check_conf_cover_rdv(p: &Protocol, c_f: &Configuration) -> Result<bool, FixpointError> {
    if c_f.is_empty() {
        return Err(ProtocolError::Configuration("configurations must be non-empty".into()).into());
    }
    Ok(respects(p, fixpoint(p)?.last(), c_f))
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unjustified((q, m)) => write!(f, "token ({q},{m}) has no justifying path"),
            Violation::MixedPair(a, b) => write!(
                f,
                "tokens ({},{}) and ({},{}) are neither mutually received nor mutually unreceived",
                a.0, a.1, b.0, b.1
            ),
            Violation::Overlap(q) => write!(f, "state {q} is both unbounded and a token state"),
        }
    }
}
