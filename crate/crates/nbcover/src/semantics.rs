//! Concrete operational semantics, replay, bounded exploration, and lifting.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{ProtocolError, ReplayError};
use crate::protocol::{Label, Protocol, StateId, TransId};

/// Which case of the semantics a step falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum StepKind {
    Internal,
    BroadcastDelivery,
    NonBlockingSend,
    RendezVous,
}

/// How the receptions of a step are resolved.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Receivers {
    /// Internal moves and sends nobody can receive.
    None,
    /// The single reception transition taken by the partner.
    RendezVous(TransId),
    /// Number of processes taking each reception transition (positive entries only).
    Broadcast(BTreeMap<TransId, u32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub transition: TransId,
    pub kind: StepKind,
    pub receivers: Receivers,
    pub result: Configuration,
}

impl StepOutcome {
    pub fn step(&self) -> ScriptStep {
        ScriptStep {
            transition: self.transition,
            recv: self.receivers.clone(),
        }
    }
}

/// One fully resolved move: a transition plus its reception choices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScriptStep {
    pub transition: TransId,
    pub recv: Receivers,
}

/// A replayable execution from `{initial_size · q_in}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionScript {
    pub initial_size: u32,
    pub steps: Vec<ScriptStep>,
}

impl ExecutionScript {
    pub fn empty(initial_size: u32) -> Self {
        ExecutionScript {
            initial_size,
            steps: Vec::new(),
        }
    }
}

/// Processes other than the sender able to receive `m` from state `s`.
fn available(p: &Protocol, c: &Configuration, sender: StateId, s: StateId, m: usize) -> u32 {
    if !p.can_receive(s, m) {
        return 0;
    }
    c.get(s) - u32::from(s == sender)
}

/// All ways of splitting `n` indistinguishable items over `k` slots.
fn compositions(n: u32, k: usize) -> Vec<Vec<u32>> {
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in (0..=n).rev() {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Every one-step successor of `c` through transition `t`.
pub fn successors_via(p: &Protocol, c: &Configuration, t: TransId) -> Vec<StepOutcome> {
    let tr = *p.transition(t);
    if c.get(tr.source) == 0 {
        return Vec::new();
    }
    let mut base = c.clone();
    base.remove(tr.source, 1);
    let mut out = Vec::new();
    match tr.label {
        Label::Receive(_) => {}
        Label::Internal => {
            base.add(tr.destination, 1);
            out.push(StepOutcome {
                transition: t,
                kind: StepKind::Internal,
                receivers: Receivers::None,
                result: base,
            });
        }
        Label::Send(m) => {
            let mut any = false;
            for (s, _) in c.iter() {
                if available(p, c, tr.source, s, m) == 0 {
                    continue;
                }
                any = true;
                for &r in p.receptions(s, m) {
                    let mut res = base.clone();
                    res.remove(s, 1);
                    res.add(p.transition(r).destination, 1);
                    res.add(tr.destination, 1);
                    out.push(StepOutcome {
                        transition: t,
                        kind: StepKind::RendezVous,
                        receivers: Receivers::RendezVous(r),
                        result: res,
                    });
                }
            }
            if !any {
                base.add(tr.destination, 1);
                out.push(StepOutcome {
                    transition: t,
                    kind: StepKind::NonBlockingSend,
                    receivers: Receivers::None,
                    result: base,
                });
            }
        }
        Label::Broadcast(m) => {
            // Each receiving state contributes the product of its compositions.
            let mut partial: Vec<(BTreeMap<TransId, u32>, Configuration)> = vec![(BTreeMap::new(), {
                let mut b = base.clone();
                b.add(tr.destination, 1);
                b
            })];
            for (s, _) in c.iter() {
                let avail = available(p, c, tr.source, s, m);
                if avail == 0 {
                    continue;
                }
                let recs = p.receptions(s, m);
                let splits = compositions(avail, recs.len());
                let mut next = Vec::with_capacity(partial.len() * splits.len());
                for (map, conf) in &partial {
                    for split in &splits {
                        let mut map = map.clone();
                        let mut conf = conf.clone();
                        conf.remove(s, avail);
                        for (&r, &k) in recs.iter().zip(split) {
                            if k > 0 {
                                map.insert(r, k);
                                conf.add(p.transition(r).destination, k);
                            }
                        }
                        next.push((map, conf));
                    }
                }
                partial = next;
            }
            for (map, result) in partial {
                out.push(StepOutcome {
                    transition: t,
                    kind: StepKind::BroadcastDelivery,
                    receivers: Receivers::Broadcast(map),
                    result,
                });
            }
        }
    }
    out.sort_by(|a, b| (&a.result, &a.receivers).cmp(&(&b.result, &b.receivers)));
    out
}

/// Every one-step successor of `c`, ordered by transition index and then by result.
pub fn successors(p: &Protocol, c: &Configuration) -> Vec<StepOutcome> {
    (0..p.transitions().len())
        .flat_map(|t| successors_via(p, c, t))
        .collect()
}

/// Applies one resolved step, checking it against the semantics.
pub fn apply_step(
    p: &Protocol,
    c: &Configuration,
    step: &ScriptStep,
) -> Result<Configuration, String> {
    let Some(tr) = p.transitions().get(step.transition).copied() else {
        return Err(format!("no transition with index {}", step.transition));
    };
    if c.get(tr.source) == 0 {
        return Err(format!(
            "transition {} is disabled: no process on {}",
            p.transition_text(&tr),
            p.state_name(tr.source)
        ));
    }
    let mut res = c.clone();
    res.remove(tr.source, 1);
    match (tr.label, &step.recv) {
        (Label::Receive(_), _) => return Err("a reception cannot be fired on its own".into()),
        (Label::Internal, Receivers::None) => {}
        (Label::Send(m), Receivers::None) => {
            if let Some((s, _)) = c.iter().find(|&(s, _)| available(p, c, tr.source, s, m) > 0) {
                return Err(format!(
                    "send is not non-blocking: a process on {} can receive",
                    p.state_name(s)
                ));
            }
        }
        (Label::Send(m), Receivers::RendezVous(r)) => {
            let rt = p
                .transitions()
                .get(*r)
                .ok_or_else(|| format!("no transition with index {r}"))?;
            if rt.label != Label::Receive(m) {
                return Err("rendez-vous partner is not a reception of the sent message".into());
            }
            if available(p, c, tr.source, rt.source, m) == 0 {
                return Err(format!(
                    "no receiver available on {}",
                    p.state_name(rt.source)
                ));
            }
            res.remove(rt.source, 1);
            res.add(rt.destination, 1);
        }
        (Label::Broadcast(m), Receivers::Broadcast(map)) => {
            let mut per_state: BTreeMap<StateId, u32> = BTreeMap::new();
            for (&r, &k) in map {
                let rt = p
                    .transitions()
                    .get(r)
                    .ok_or_else(|| format!("no transition with index {r}"))?;
                if rt.label != Label::Receive(m) {
                    return Err("broadcast receiver is not a reception of the message".into());
                }
                *per_state.entry(rt.source).or_insert(0) += k;
            }
            for (s, _) in c.iter() {
                let avail = available(p, c, tr.source, s, m);
                let used = per_state.get(&s).copied().unwrap_or(0);
                if used != avail {
                    return Err(format!(
                        "broadcast must be received by exactly {avail} process(es) on {}, got {used}",
                        p.state_name(s)
                    ));
                }
            }
            if let Some((&s, _)) = per_state.iter().find(|(&s, &k)| k > 0 && c.get(s) == 0) {
                return Err(format!("no process on {}", p.state_name(s)));
            }
            for (&r, &k) in map {
                let rt = p.transition(r);
                res.remove(rt.source, k);
                res.add(rt.destination, k);
            }
        }
        _ => return Err("receiver resolution does not match the transition label".into()),
    }
    res.add(tr.destination, 1);
    Ok(res)
}

/// Replays `steps` from an arbitrary start, returning the full trace.
pub fn replay_from(
    p: &Protocol,
    start: &Configuration,
    steps: &[ScriptStep],
) -> Result<Vec<Configuration>, ReplayError> {
    let mut trace = vec![start.clone()];
    for (index, step) in steps.iter().enumerate() {
        let next = apply_step(p, &trace[index], step)
            .map_err(|reason| ReplayError { index, reason })?;
        trace.push(next);
    }
    Ok(trace)
}

/// Replays a script from `{initial_size · q_in}`.
pub fn replay(p: &Protocol, script: &ExecutionScript) -> Result<Vec<Configuration>, ReplayError> {
    if script.initial_size == 0 {
        return Err(ReplayError {
            index: 0,
            reason: "initial size must be positive".into(),
        });
    }
    replay_from(
        p,
        &Configuration::uniform(p.initial(), script.initial_size),
        &script.steps,
    )
}

/// Picks one canonical successor of `c` through `t`, preferring the given
/// reception transition for the partner (rendez-vous) or for at least one
/// receiver (broadcast). Extra broadcast receivers take their first reception.
pub fn canonical_step(
    p: &Protocol,
    c: &Configuration,
    t: TransId,
    prefer: Option<TransId>,
) -> Option<ScriptStep> {
    let tr = *p.transition(t);
    if c.get(tr.source) == 0 {
        return None;
    }
    let recv = match tr.label {
        Label::Receive(_) => return None,
        Label::Internal => Receivers::None,
        Label::Send(m) => {
            if let Some(r) = prefer.filter(|&r| {
                p.transition(r).label == Label::Receive(m)
                    && available(p, c, tr.source, p.transition(r).source, m) > 0
            }) {
                Receivers::RendezVous(r)
            } else {
                match c.iter().find(|&(s, _)| available(p, c, tr.source, s, m) > 0) {
                    Some((s, _)) => Receivers::RendezVous(p.receptions(s, m)[0]),
                    None => Receivers::None,
                }
            }
        }
        Label::Broadcast(m) => {
            let mut map = BTreeMap::new();
            for (s, _) in c.iter() {
                let mut avail = available(p, c, tr.source, s, m);
                if avail == 0 {
                    continue;
                }
                if let Some(r) = prefer.filter(|&r| p.transition(r).source == s) {
                    if p.transition(r).label == Label::Receive(m) {
                        *map.entry(r).or_insert(0) += 1;
                        avail -= 1;
                    }
                }
                if avail > 0 {
                    *map.entry(p.receptions(s, m)[0]).or_insert(0) += avail;
                }
            }
            Receivers::Broadcast(map)
        }
    };
    Some(ScriptStep { transition: t, recv })
}

/// Exploration bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_states: usize,
    pub max_depth: Option<usize>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: 1 << 20,
            max_depth: None,
        }
    }
}

/// Configurations reachable from `{n · q_in}` in BFS order, with parent links.
#[derive(Debug, Clone)]
pub struct ReachSet {
    pub configs: Vec<Configuration>,
    parents: Vec<Option<(usize, ScriptStep)>>,
    index: HashMap<Configuration, usize>,
    pub truncated: bool,
    pub initial_size: u32,
}

impl ReachSet {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn contains(&self, c: &Configuration) -> bool {
        self.index.contains_key(c)
    }

    /// The BFS path to the configuration with the given index.
    pub fn script_to(&self, mut i: usize) -> ExecutionScript {
        let mut steps = Vec::new();
        while let Some((parent, step)) = &self.parents[i] {
            steps.push(step.clone());
            i = *parent;
        }
        steps.reverse();
        ExecutionScript {
            initial_size: self.initial_size,
            steps,
        }
    }

    /// Index of the first configuration (in BFS order) satisfying `pred`.
    pub fn find(&self, pred: impl Fn(&Configuration) -> bool) -> Option<usize> {
        self.configs.iter().position(pred)
    }
}

fn bfs(
    p: &Protocol,
    n: u32,
    limits: Limits,
    stop: impl Fn(&Configuration) -> bool,
) -> (ReachSet, Option<usize>) {
    let init = Configuration::uniform(p.initial(), n);
    let mut rs = ReachSet {
        configs: vec![init.clone()],
        parents: vec![None],
        index: HashMap::from([(init.clone(), 0)]),
        truncated: false,
        initial_size: n,
    };
    if stop(&init) {
        return (rs, Some(0));
    }
    let mut depth = vec![0usize];
    let mut head = 0;
    while head < rs.configs.len() {
        let c = rs.configs[head].clone();
        let d = depth[head];
        for o in successors(p, &c) {
            if rs.index.contains_key(&o.result) {
                continue;
            }
            if limits.max_depth.is_some_and(|m| d >= m) || rs.configs.len() >= limits.max_states
            {
                rs.truncated = true;
                continue;
            }
            let i = rs.configs.len();
            rs.index.insert(o.result.clone(), i);
            rs.parents.push(Some((head, o.step())));
            depth.push(d + 1);
            let hit = stop(&o.result);
            rs.configs.push(o.result);
            if hit {
                return (rs, Some(i));
            }
        }
        head += 1;
    }
    (rs, None)
}

/// Breadth-first reachability from `{n · q_in}`; limits flag a partial result.
pub fn explore(p: &Protocol, n: u32, limits: Limits) -> ReachSet {
    bfs(p, n, limits, |_| false).0
}

/// Outcome of a bounded coverability query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverVerdict {
    /// A replay-verified witness whose final configuration covers the target.
    Covered(ExecutionScript),
    NotCovered,
    /// Limits were hit before a witness was found.
    Unknown,
}

impl CoverVerdict {
    pub fn covered(&self) -> Option<bool> {
        match self {
            CoverVerdict::Covered(_) => Some(true),
            CoverVerdict::NotCovered => Some(false),
            CoverVerdict::Unknown => None,
        }
    }
}

/// Is `target` coverable from `{n · q_in}`?
pub fn cover_query(
    p: &Protocol,
    n: u32,
    target: &Configuration,
    limits: Limits,
) -> Result<CoverVerdict, ProtocolError> {
    if target.size() > n {
        return Err(ProtocolError::Configuration(format!(
            "target has {} processes but only {n} are available",
            target.size()
        )));
    }
    let (rs, hit) = bfs(p, n, limits, |c| target.le(c));
    Ok(match hit {
        Some(i) => {
            let script = rs.script_to(i);
            let trace = replay(p, &script).expect("BFS witnesses replay");
            assert!(target.le(trace.last().unwrap()));
            CoverVerdict::Covered(script)
        }
        None if rs.truncated => CoverVerdict::Unknown,
        None => CoverVerdict::NotCovered,
    })
}

/// Lifts a run from `start` to a run from `d0 ⪰ start`, returning the lifted
/// steps and configurations. Extra processes in waiting states take their
/// first reception on broadcasts, and partner a send that was non-blocking in
/// the original run; extra processes in action states never move.
pub fn lift_run(
    p: &Protocol,
    start: &Configuration,
    steps: &[ScriptStep],
    d0: &Configuration,
) -> Result<(Vec<ScriptStep>, Vec<Configuration>), ReplayError> {
    if !start.le(d0) {
        return Err(ReplayError {
            index: 0,
            reason: "lift start does not cover the original start".into(),
        });
    }
    let mut c = start.clone();
    let mut d = d0.clone();
    let mut lifted = Vec::with_capacity(steps.len());
    let mut trace = vec![d.clone()];
    for (index, step) in steps.iter().enumerate() {
        let err = |reason: String| ReplayError { index, reason };
        let next_c = apply_step(p, &c, step).map_err(err)?;
        let extra = d.minus(&c).expect("lifted run dominates the original");
        let tr = *p.transition(step.transition);
        let recv = match (tr.label, &step.recv) {
            (Label::Broadcast(m), Receivers::Broadcast(map)) => {
                let mut map = map.clone();
                for (s, k) in extra.iter() {
                    if p.can_receive(s, m) {
                        *map.entry(p.receptions(s, m)[0]).or_insert(0) += k;
                    }
                }
                Receivers::Broadcast(map)
            }
            (Label::Send(m), Receivers::None) => {
                match extra.iter().find(|&(s, _)| p.can_receive(s, m)) {
                    Some((s, _)) => Receivers::RendezVous(p.receptions(s, m)[0]),
                    None => Receivers::None,
                }
            }
            (_, r) => r.clone(),
        };
        let lstep = ScriptStep {
            transition: step.transition,
            recv,
        };
        let next_d = apply_step(p, &d, &lstep).map_err(err)?;
        debug_assert!(next_c.le(&next_d));
        c = next_c;
        d = next_d;
        lifted.push(lstep);
        trace.push(d.clone());
    }
    Ok((lifted, trace))
}

/// Lifts an execution given as a trace of configurations to one starting from
/// `d0 ⪰ trace[0]`, preserving `D_i ⪰ C_i` pointwise.
pub fn monotone_lift(
    p: &Protocol,
    trace: &[Configuration],
    d0: &Configuration,
) -> Result<Vec<Configuration>, ReplayError> {
    let Some(start) = trace.first() else {
        return Err(ReplayError {
            index: 0,
            reason: "empty trace".into(),
        });
    };
    let mut steps = Vec::with_capacity(trace.len().saturating_sub(1));
    for (index, pair) in trace.windows(2).enumerate() {
        let o = successors(p, &pair[0])
            .into_iter()
            .find(|o| o.result == pair[1])
            .ok_or_else(|| ReplayError {
                index,
                reason: "consecutive configurations are not related by a step".into(),
            })?;
        steps.push(o.step());
    }
    Ok(lift_run(p, start, &steps, d0)?.1)
}

#[derive(Serialize, Deserialize)]
struct ScriptDoc {
    initial_size: u32,
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
struct StepDoc {
    t: [String; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recv: Option<BTreeMap<String, u32>>,
}

fn reception_key(p: &Protocol, r: TransId) -> String {
    p.transition_text(p.transition(r))
}

impl ExecutionScript {
    /// JSON document with transitions and receptions given by name.
    pub fn to_json(&self, p: &Protocol) -> serde_json::Value {
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let tr = p.transition(s.transition);
                let msg = tr
                    .label
                    .message()
                    .map(|m| p.message_name(m).to_string())
                    .unwrap_or_default();
                let recv = match &s.recv {
                    Receivers::None => None,
                    Receivers::RendezVous(r) => Some(BTreeMap::from([(reception_key(p, *r), 1)])),
                    Receivers::Broadcast(map) => Some(
                        map.iter()
                            .map(|(&r, &k)| (reception_key(p, r), k))
                            .collect(),
                    ),
                };
                StepDoc {
                    t: [
                        p.state_name(tr.source).to_string(),
                        tr.label.symbol().to_string(),
                        msg,
                        p.state_name(tr.destination).to_string(),
                    ],
                    recv,
                }
            })
            .collect();
        serde_json::to_value(ScriptDoc {
            initial_size: self.initial_size,
            steps,
        })
        .expect("script documents serialize")
    }

    /// Parses the JSON document produced by [`ExecutionScript::to_json`].
    pub fn from_json(p: &Protocol, text: &str) -> Result<ExecutionScript, String> {
        let doc: ScriptDoc = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let find = |src: &str, sym: &str, msg: &str, dst: &str| -> Result<TransId, String> {
            p.transitions()
                .iter()
                .position(|t| {
                    p.state_name(t.source) == src
                        && p.state_name(t.destination) == dst
                        && t.label.symbol() == sym
                        && t.label.message().map_or("", |m| p.message_name(m)) == msg
                })
                .ok_or_else(|| format!("unknown transition {src} {sym}{msg} {dst}"))
        };
        let mut steps = Vec::new();
        for s in doc.steps {
            let [src, sym, msg, dst] = &s.t;
            let t = find(src, sym, msg, dst)?;
            let mut map = BTreeMap::new();
            for (key, k) in s.recv.unwrap_or_default() {
                let parts: Vec<&str> = key.split_whitespace().collect();
                let [rs, rl, rd] = parts[..] else {
                    return Err(format!("invalid reception key {key:?}"));
                };
                let rm = rl
                    .strip_prefix('?')
                    .ok_or_else(|| format!("invalid reception key {key:?}"))?;
                map.insert(find(rs, "?", rm, rd)?, k);
            }
            let recv = match p.transition(t).label {
                Label::Broadcast(_) => Receivers::Broadcast(map),
                _ if map.is_empty() => Receivers::None,
                _ if map.len() == 1 && map.values().all(|&k| k == 1) => {
                    Receivers::RendezVous(*map.keys().next().unwrap())
                }
                _ => return Err("a rendez-vous has exactly one receiver".into()),
            };
            steps.push(ScriptStep {
                transition: t,
                recv,
            });
        }
        Ok(ExecutionScript {
            initial_size: doc.initial_size,
            steps,
        })
    }
}
