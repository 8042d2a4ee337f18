use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{syntax, ReductionError};
use crate::config::Configuration;
use crate::parse::{is_ident, logical_lines};
use crate::protocol::{Protocol, ProtocolBuilder};

/// A complete deterministic automaton with a single accepting state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    pub name: String,
    pub states: Vec<String>,
    pub initial: usize,
    pub accepting: usize,
    /// `delta[q][a]`, indexed by the shared alphabet.
    pub delta: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfaSet {
    pub alphabet: Vec<String>,
    pub automata: Vec<Dfa>,
}

/// Reserved message used by the dispatcher.
const GO: &str = "go";

impl DfaSet {
    pub fn validate(&self) -> Result<(), ReductionError> {
        if self.alphabet.iter().any(|a| a == GO) {
            return Err(ReductionError::Invalid(format!(
                "letter {GO:?} is reserved by the reduction"
            )));
        }
        if self.automata.is_empty() {
            return Err(ReductionError::Invalid("no automata".into()));
        }
        for d in &self.automata {
            let n = d.states.len();
            let total = d.delta.len() == n
                && d.delta
                    .iter()
                    .all(|row| row.len() == self.alphabet.len() && row.iter().all(|&q| q < n));
            if !total || d.initial >= n || d.accepting >= n {
                return Err(ReductionError::Invalid(format!(
                    "automaton {} is not complete",
                    d.name
                )));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for d in &self.automata {
            let _ = writeln!(out, "dfa {}", d.name);
            let _ = writeln!(out, "sigma {}", self.alphabet.join(" "));
            let _ = writeln!(out, "init {}", d.states[d.initial]);
            let _ = writeln!(out, "accept {}", d.states[d.accepting]);
            for (q, row) in d.delta.iter().enumerate() {
                for (a, &q2) in row.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "delta {} {} {}",
                        d.states[q], self.alphabet[a], d.states[q2]
                    );
                }
            }
        }
        out
    }
}

#[derive(Default)]
struct PartialDfa {
    name: String,
    line: usize,
    init: Option<String>,
    accept: Option<String>,
    delta: Vec<(usize, String, String, String)>,
}

fn finish_dfa(pd: PartialDfa, alphabet: &[String]) -> Result<Dfa, ReductionError> {
    let mut states: Vec<String> = Vec::new();
    let id = |s: &str, states: &mut Vec<String>| match states.iter().position(|x| x == s) {
        Some(i) => i,
        None => {
            states.push(s.to_string());
            states.len() - 1
        }
    };
    let init = pd
        .init
        .ok_or_else(|| syntax(pd.line, format!("automaton {} has no init", pd.name)))?;
    let accept = pd
        .accept
        .ok_or_else(|| syntax(pd.line, format!("automaton {} has no accept", pd.name)))?;
    let initial = id(&init, &mut states);
    let accepting = id(&accept, &mut states);
    let mut edges = Vec::new();
    for (line, q, a, q2) in &pd.delta {
        let ai = alphabet
            .iter()
            .position(|x| x == a)
            .ok_or_else(|| syntax(*line, format!("letter {a} not in sigma")))?;
        edges.push((*line, id(q, &mut states), ai, id(q2, &mut states)));
    }
    let mut delta = vec![vec![usize::MAX; alphabet.len()]; states.len()];
    for (line, q, a, q2) in edges {
        if delta[q][a] != usize::MAX && delta[q][a] != q2 {
            return Err(syntax(line, "nondeterministic transition"));
        }
        delta[q][a] = q2;
    }
    if delta.iter().flatten().any(|&x| x == usize::MAX) {
        return Err(ReductionError::Invalid(format!(
            "automaton {} is not complete",
            pd.name
        )));
    }
    Ok(Dfa {
        name: pd.name,
        states,
        initial,
        accepting,
        delta,
    })
}

/// Parses one or more `dfa` blocks sharing one alphabet.
pub fn parse_dfa_set(text: &str) -> Result<DfaSet, ReductionError> {
    let mut alphabet: Option<Vec<String>> = None;
    let mut blocks: Vec<PartialDfa> = Vec::new();
    for (line, toks) in logical_lines(text) {
        for t in &toks[1..] {
            if !is_ident(t) {
                return Err(syntax(line, format!("invalid identifier {t:?}")));
            }
        }
        if toks[0] == "dfa" {
            if toks.len() != 2 {
                return Err(syntax(line, "expected `dfa <name>`"));
            }
            blocks.push(PartialDfa {
                name: toks[1].to_string(),
                line,
                ..Default::default()
            });
            continue;
        }
        let Some(cur) = blocks.last_mut() else {
            return Err(syntax(line, "expected `dfa <name>` first"));
        };
        match (toks[0], toks.len()) {
            ("sigma", n) if n >= 2 => {
                let letters: Vec<String> = toks[1..].iter().map(|s| s.to_string()).collect();
                match &alphabet {
                    Some(a) if *a != letters => {
                        return Err(syntax(line, "all automata must share one alphabet"))
                    }
                    _ => alphabet = Some(letters),
                }
            }
            ("init", 2) if cur.init.is_none() => cur.init = Some(toks[1].to_string()),
            ("accept", 2) if cur.accept.is_none() => cur.accept = Some(toks[1].to_string()),
            ("delta", 4) => cur.delta.push((
                line,
                toks[1].to_string(),
                toks[2].to_string(),
                toks[3].to_string(),
            )),
            _ => return Err(syntax(line, "unrecognized or duplicate DFA line")),
        }
    }
    let alphabet = alphabet.ok_or_else(|| ReductionError::Invalid("missing sigma".into()))?;
    let automata = blocks
        .into_iter()
        .map(|b| finish_dfa(b, &alphabet))
        .collect::<Result<Vec<_>, _>>()?;
    let set = DfaSet { alphabet, automata };
    set.validate()?;
    Ok(set)
}

/// The protocol simulating all automata on one broadcast word, and the target
/// `{q_1^f, …, q_n^f}`. Automaton states are prefixed `a<i>_`.
pub fn dfa_intersection_to_protocol(
    d: &DfaSet,
) -> Result<(Protocol, Configuration), ReductionError> {
    d.validate()?;
    let mut b = ProtocolBuilder::new("dfa_intersection", "q_in");
    b.internal("q_in", "q_s");
    let n = d.automata.len();
    for i in 1..=n {
        b.internal("q_in", &format!("q_{i}"));
    }
    b.broadcast("q_s", GO, "q_s");
    for a in &d.alphabet {
        b.broadcast("q_s", a, "q_s");
    }
    let local = |i: usize, q: &str| format!("a{i}_{q}");
    for (i, dfa) in d.automata.iter().enumerate() {
        let i = i + 1;
        b.receive(&format!("q_{i}"), GO, &local(i, &dfa.states[dfa.initial]));
        for (q, row) in dfa.delta.iter().enumerate() {
            for (a, &q2) in row.iter().enumerate() {
                b.receive(
                    &local(i, &dfa.states[q]),
                    &d.alphabet[a],
                    &local(i, &dfa.states[q2]),
                );
            }
        }
        for q in &dfa.states {
            b.receive(&local(i, q), GO, "q_fail");
        }
    }
    let p = b
        .finish()
        .map_err(|e| ReductionError::Invalid(e.to_string()))?;
    let target = Configuration::from_states(d.automata.iter().enumerate().map(|(i, dfa)| {
        p.state_id(&local(i + 1, &dfa.states[dfa.accepting]))
            .expect("accepting state exists")
    }));
    Ok((p, target))
}

/// Product-automaton reachability of the all-accepting tuple.
pub fn dfa_intersection_nonempty(d: &DfaSet) -> bool {
    let start: Vec<usize> = d.automata.iter().map(|a| a.initial).collect();
    let goal: Vec<usize> = d.automata.iter().map(|a| a.accepting).collect();
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(t) = queue.pop_front() {
        if t == goal {
            return true;
        }
        for a in 0..d.alphabet.len() {
            let next: Vec<usize> = d
                .automata
                .iter()
                .zip(&t)
                .map(|(dfa, &q)| dfa.delta[q][a])
                .collect();
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    false
}

/// A seeded random set of 1..=`max_automata` complete DFAs with
/// 1..=`max_states` states each over `{a, b}`.
pub fn random_dfa_set(seed: u64, max_automata: usize, max_states: usize) -> DfaSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = vec!["a".to_string(), "b".to_string()];
    let n = rng.gen_range(1..=max_automata.max(1));
    let automata = (1..=n)
        .map(|i| {
            let k = rng.gen_range(1..=max_states.max(1));
            Dfa {
                name: format!("A{i}"),
                states: (0..k).map(|j| format!("s{j}")).collect(),
                initial: 0,
                accepting: rng.gen_range(0..k),
                delta: (0..k)
                    .map(|_| (0..alphabet.len()).map(|_| rng.gen_range(0..k)).collect())
                    .collect(),
            }
        })
        .collect();
    DfaSet { alphabet, automata }
}
