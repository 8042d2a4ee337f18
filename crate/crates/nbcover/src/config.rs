//! Configurations: finite multisets of states.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::ProtocolError;
use crate::protocol::{Protocol, StateId, StateSet};

/// A multiset over states, stored sparsely with no zero entries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Configuration {
    counts: BTreeMap<StateId, u32>,
    size: u32,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    /// `{n · q}`.
    pub fn uniform(q: StateId, n: u32) -> Self {
        let mut c = Self::new();
        c.add(q, n);
        c
    }

    pub fn from_states(states: impl IntoIterator<Item = StateId>) -> Self {
        let mut c = Self::new();
        for q in states {
            c.add(q, 1);
        }
        c
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (StateId, u32)>) -> Self {
        let mut c = Self::new();
        for (q, n) in counts {
            c.add(q, n);
        }
        c
    }

    pub fn get(&self, q: StateId) -> u32 {
        self.counts.get(&q).copied().unwrap_or(0)
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn add(&mut self, q: StateId, n: u32) {
        if n > 0 {
            *self.counts.entry(q).or_insert(0) += n;
            self.size += n;
        }
    }

    /// Removes `n` copies of `q`; panics if fewer are present.
    pub fn remove(&mut self, q: StateId, n: u32) {
        if n == 0 {
            return;
        }
        let c = self.counts.get_mut(&q).expect("removing an absent state");
        assert!(*c >= n, "removing more copies than present");
        *c -= n;
        if *c == 0 {
            self.counts.remove(&q);
        }
        self.size -= n;
    }

    /// Occupied states with their counts, in state order.
    pub fn iter(&self) -> impl Iterator<Item = (StateId, u32)> + '_ {
        self.counts.iter().map(|(&q, &n)| (q, n))
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.counts.keys().copied()
    }

    pub fn support_set(&self, num_states: usize) -> StateSet {
        let mut s = StateSet::with_capacity(num_states);
        for q in self.support() {
            s.insert(q);
        }
        s
    }

    /// `self ⪯ other`.
    pub fn le(&self, other: &Configuration) -> bool {
        self.iter().all(|(q, n)| other.get(q) >= n)
    }

    pub fn plus(&self, other: &Configuration) -> Configuration {
        let mut c = self.clone();
        for (q, n) in other.iter() {
            c.add(q, n);
        }
        c
    }

    /// `self − other`, or `None` unless `other ⪯ self`.
    pub fn minus(&self, other: &Configuration) -> Option<Configuration> {
        if !other.le(self) {
            return None;
        }
        let mut c = self.clone();
        for (q, n) in other.iter() {
            c.remove(q, n);
        }
        Some(c)
    }

    /// Human-readable form such as `{2·q3, q6}`.
    pub fn display(&self, p: &Protocol) -> String {
        let mut out = String::from("{");
        for (i, (q, n)) in self.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            if n > 1 {
                let _ = write!(out, "{n}·");
            }
            out.push_str(p.state_name(q));
        }
        out.push('}');
        out
    }

    /// State-name → count map.
    pub fn named(&self, p: &Protocol) -> BTreeMap<String, u32> {
        self.iter()
            .map(|(q, n)| (p.state_name(q).to_string(), n))
            .collect()
    }

    /// Parses `"q3:2,q6:1"` (a bare `q` means count 1).
    pub fn parse_target(p: &Protocol, text: &str) -> Result<Configuration, ProtocolError> {
        let mut c = Configuration::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, count) = match item.split_once(':') {
                Some((n, k)) => {
                    let k: u32 = k.trim().parse().map_err(|_| {
                        ProtocolError::Configuration(format!("invalid count in {item:?}"))
                    })?;
                    (n.trim(), k)
                }
                None => (item, 1),
            };
            c.add(p.require_state(name)?, count);
        }
        if c.is_empty() {
            return Err(ProtocolError::Configuration(
                "configurations must be non-empty".into(),
            ));
        }
        Ok(c)
    }
}

impl PartialOrd for Configuration {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical total order (by size, then lexicographic on the sparse entries),
/// used only for deterministic sorting.
impl Ord for Configuration {
    fn cmp(&self, other: &Self) -> Ordering {
        self.size
            .cmp(&other.size)
            .then_with(|| self.counts.iter().cmp(other.counts.iter()))
    }
}
