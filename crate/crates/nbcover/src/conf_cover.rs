//! Configuration coverability for wait-only protocols over abstract
//! configurations `(M, S)`.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigUint;

use crate::config::Configuration;
use crate::error::ProtocolError;
use crate::protocol::{require_wait_only, Label, Protocol, StateSet, TransId};
use crate::semantics::successors_via;

/// `(M, S)`: `K` tracked processes plus the states seen so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AbstractConfiguration {
    pub m_part: Configuration,
    pub s_part: StateSet,
}

impl AbstractConfiguration {
    /// `({K · q_in}, {q_in})`.
    pub fn initial(p: &Protocol, k: u32) -> Self {
        let mut s = p.empty_set();
        s.insert(p.initial());
        AbstractConfiguration {
            m_part: Configuration::uniform(p.initial(), k),
            s_part: s,
        }
    }

    pub fn display(&self, p: &Protocol) -> String {
        format!(
            "({}, {})",
            self.m_part.display(p),
            p.format_set(&self.s_part)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbstractKind {
    Step,
    Ext,
    Switch,
}

impl AbstractKind {
    pub fn name(self) -> &'static str {
        match self {
            AbstractKind::Step => "step",
            AbstractKind::Ext => "ext",
            AbstractKind::Switch => "switch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractStep {
    pub kind: AbstractKind,
    pub transition: TransId,
    pub from: AbstractConfiguration,
    pub to: AbstractConfiguration,
}

/// `⟦γ⟧` membership: `M ⪯ C` and every occupied state of `C` lies in `S`.
pub fn interp_member(gamma: &AbstractConfiguration, c: &Configuration) -> bool {
    gamma.m_part.le(c) && c.support().all(|q| gamma.s_part.contains(q))
}

/// The largest admissible `S'` for transition `t`.
fn maximal_s(p: &Protocol, s: &StateSet, t: TransId) -> StateSet {
    let tr = p.transition(t);
    let mut out = s.clone();
    out.insert(tr.destination);
    if let Some(a) = tr.label.message() {
        for q in s.ones() {
            for &r in p.receptions(q, a) {
                out.insert(p.transition(r).destination);
            }
        }
    }
    out
}

/// Successors of `γ` under step, ext, and switch, with maximal `S'`.
/// Internal transitions behave as broadcasts nobody receives.
pub fn abstract_successors(p: &Protocol, gamma: &AbstractConfiguration) -> Vec<AbstractStep> {
    let mut out: Vec<AbstractStep> = Vec::new();
    let mut push = |kind, t, m_part: Configuration, s_part: &StateSet| {
        let to = AbstractConfiguration {
            m_part,
            s_part: s_part.clone(),
        };
        if !out
            .iter()
            .any(|x| x.kind == kind && x.transition == t && x.to == to)
        {
            out.push(AbstractStep {
                kind,
                transition: t,
                from: gamma.clone(),
                to,
            });
        }
    };
    let m = &gamma.m_part;
    for (t, tr) in p.transitions().iter().enumerate() {
        if tr.label.is_receive() || !gamma.s_part.contains(tr.source) {
            continue;
        }
        let q = tr.source;
        let s2 = maximal_s(p, &gamma.s_part, t);
        if m.get(q) > 0 {
            for o in successors_via(p, m, t) {
                push(AbstractKind::Step, t, o.result, &s2);
            }
        }
        let mut mq = m.clone();
        mq.add(q, 1);
        for o in successors_via(p, &mq, t) {
            let mut x = o.result;
            x.remove(tr.destination, 1);
            push(AbstractKind::Ext, t, x, &s2);
        }
        if let Some(a) = tr.label.message() {
            let via_s = gamma.s_part.ones().any(|s| {
                p.receptions(s, a).iter().any(|&r| {
                    let rt = p.transition(r);
                    let mut src = mq.clone();
                    src.add(s, 1);
                    let mut goal = m.clone();
                    goal.add(tr.destination, 1);
                    goal.add(rt.destination, 1);
                    successors_via(p, &src, t).iter().any(|o| o.result == goal)
                })
            });
            if via_s {
                push(AbstractKind::Ext, t, m.clone(), &s2);
            }
        }
        if let Label::Send(a) = tr.label {
            for (pst, _) in m.iter() {
                if pst != q && p.can_receive(pst, a) {
                    let mut x = m.clone();
                    x.remove(pst, 1);
                    x.add(tr.destination, 1);
                    push(AbstractKind::Switch, t, x, &s2);
                }
            }
        }
    }
    out
}

/// `K + 2^|Q| · 2^|Q| · |Q|^K`, exactly.
pub fn cutoff_bound(p: &Protocol, c_f: &Configuration) -> BigUint {
    cutoff_formula(p.num_states() as u32, c_f.size())
}

pub fn cutoff_formula(num_states: u32, k: u32) -> BigUint {
    let two = BigUint::from(2u32);
    BigUint::from(k) + two.pow(num_states) * two.pow(num_states) * BigUint::from(num_states).pow(k)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfCoverResult {
    pub covered: bool,
    pub abstract_path: Option<Vec<AbstractStep>>,
    /// Number of abstract configurations visited.
    pub visited: usize,
}

/// Breadth-first search for a vertex `(C_f, S)` reachable from `({K·q_in},{q_in})`.
pub fn check_conf_cover(
    p: &Protocol,
    c_f: &Configuration,
) -> Result<ConfCoverResult, ProtocolError> {
    require_wait_only(p)?;
    if c_f.is_empty() {
        return Err(ProtocolError::Configuration(
            "configurations must be non-empty".into(),
        ));
    }
    let init = AbstractConfiguration::initial(p, c_f.size());
    let mut nodes = vec![init.clone()];
    let mut parent: Vec<Option<(usize, AbstractStep)>> = vec![None];
    let mut index = HashMap::from([(init, 0usize)]);
    let mut queue = VecDeque::from([0usize]);
    let mut hit = (nodes[0].m_part == *c_f).then_some(0);
    while hit.is_none() {
        let Some(i) = queue.pop_front() else { break };
        let gamma = nodes[i].clone();
        for step in abstract_successors(p, &gamma) {
            if index.contains_key(&step.to) {
                continue;
            }
            let j = nodes.len();
            index.insert(step.to.clone(), j);
            nodes.push(step.to.clone());
            let done = step.to.m_part == *c_f;
            parent.push(Some((i, step)));
            queue.push_back(j);
            if done {
                hit = Some(j);
                break;
            }
        }
    }
    let abstract_path = hit.map(|mut j| {
        let mut path = Vec::new();
        while let Some((i, step)) = &parent[j] {
            path.push(step.clone());
            j = *i;
        }
        path.reverse();
        path
    });
    Ok(ConfCoverResult {
        covered: hit.is_some(),
        abstract_path,
        visited: nodes.len(),
    })
}
