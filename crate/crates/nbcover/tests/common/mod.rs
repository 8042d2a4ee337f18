//! Shared test helpers and independent oracles.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};

use nbcover::{parse_protocol, Configuration, Label, Limits, Protocol};

pub fn fig(name: &str) -> Protocol {
    let path = format!("{}/../../figs/{name}.nbp", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_protocol(&text).unwrap()
}

pub fn fig_text(file: &str) -> String {
    let path = format!("{}/../../figs/{file}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn conf(p: &Protocol, spec: &str) -> Configuration {
    Configuration::parse_target(p, spec).unwrap()
}

pub fn states(p: &Protocol, names: &[&str]) -> nbcover::StateSet {
    let mut s = p.empty_set();
    for n in names {
        s.insert(p.state_id(n).unwrap());
    }
    s
}

pub fn unlimited() -> Limits {
    Limits::default()
}

/// Dense configuration used by the independent oracle.
pub type Dense = Vec<u32>;

pub fn dense(p: &Protocol, c: &Configuration) -> Dense {
    let mut d = vec![0; p.num_states()];
    for (q, n) in c.iter() {
        d[q] = n;
    }
    d
}

/// Independent one-step successor set: processes are moved one at a time,
/// and broadcast receivers are resolved process by process.
pub fn oracle_successors(p: &Protocol, c: &Dense) -> BTreeSet<Dense> {
    let mut out = BTreeSet::new();
    for t in p.transitions() {
        if c[t.source] == 0 {
            continue;
        }
        let mut rest = c.clone();
        rest[t.source] -= 1;
        let recv_targets = |q: usize, m: usize| -> Vec<usize> {
            p.transitions()
                .iter()
                .filter(|r| r.source == q && r.label == Label::Receive(m))
                .map(|r| r.destination)
                .collect()
        };
        match t.label {
            Label::Receive(_) => {}
            Label::Internal => {
                let mut d = rest.clone();
                d[t.destination] += 1;
                out.insert(d);
            }
            Label::Send(m) => {
                let mut partnered = false;
                for q in 0..c.len() {
                    if rest[q] == 0 {
                        continue;
                    }
                    for dst in recv_targets(q, m) {
                        partnered = true;
                        let mut d = rest.clone();
                        d[q] -= 1;
                        d[dst] += 1;
                        d[t.destination] += 1;
                        out.insert(d);
                    }
                }
                if !partnered {
                    let mut d = rest.clone();
                    d[t.destination] += 1;
                    out.insert(d);
                }
            }
            Label::Broadcast(m) => {
                // Expand one receiving process at a time.
                let mut pending: Vec<usize> = Vec::new();
                for q in 0..c.len() {
                    if !recv_targets(q, m).is_empty() {
                        pending.extend(std::iter::repeat_n(q, rest[q] as usize));
                    }
                }
                let mut base = rest.clone();
                for &q in &pending {
                    base[q] -= 1;
                }
                base[t.destination] += 1;
                let mut partial: BTreeSet<Dense> = BTreeSet::from([base]);
                for &q in &pending {
                    let mut next = BTreeSet::new();
                    for d in &partial {
                        for dst in recv_targets(q, m) {
                            let mut e = d.clone();
                            e[dst] += 1;
                            next.insert(e);
                        }
                    }
                    partial = next;
                }
                out.extend(partial);
            }
        }
    }
    out
}

/// Independent reachability from `{n · q_in}`.
pub fn oracle_reach(p: &Protocol, n: u32) -> HashSet<Dense> {
    let mut init = vec![0; p.num_states()];
    init[p.initial()] = n;
    let mut seen = HashSet::from([init.clone()]);
    let mut queue = VecDeque::from([init]);
    while let Some(c) = queue.pop_front() {
        for d in oracle_successors(p, &c) {
            if seen.insert(d.clone()) {
                queue.push_back(d);
            }
        }
    }
    seen
}

/// Does some configuration reachable from `{n · q_in}` cover `target`?
pub fn oracle_covers(p: &Protocol, n: u32, target: &Configuration) -> bool {
    let t = dense(p, target);
    oracle_reach(p, n)
        .iter()
        .any(|c| c.iter().zip(&t).all(|(a, b)| a >= b))
}

/// Configurations of a given size over `k` states, as dense vectors.
pub fn all_configs(k: usize, size: u32) -> Vec<Dense> {
    fn go(k: usize, size: u32, prefix: &mut Dense, out: &mut Vec<Dense>) {
        if prefix.len() == k - 1 {
            prefix.push(size);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for i in 0..=size {
            prefix.push(i);
            go(k, size - i, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(k, size, &mut Vec::new(), &mut out);
    out
}

pub fn to_config(d: &Dense) -> Configuration {
    Configuration::from_counts(d.iter().enumerate().map(|(q, &n)| (q, n)))
}

/// Builds a script from `(transition, [(reception, count)])` pairs in the
/// JSON exchange format.
pub fn script(p: &Protocol, n: u32, steps: &[(&str, &[(&str, u32)])]) -> nbcover::ExecutionScript {
    let steps: Vec<serde_json::Value> = steps
        .iter()
        .map(|(t, recv)| {
            let parts: Vec<&str> = t.split_whitespace().collect();
            let (sym, msg) = if parts[1] == "tau" {
                ("tau", "")
            } else if let Some(m) = parts[1].strip_prefix("!!") {
                ("!!", m)
            } else {
                ("!", parts[1].strip_prefix('!').unwrap())
            };
            let mut v = serde_json::json!({"t": [parts[0], sym, msg, parts[2]]});
            if !recv.is_empty() {
                v["recv"] = recv
                    .iter()
                    .map(|(k, c)| (k.to_string(), serde_json::json!(c)))
                    .collect::<serde_json::Map<_, _>>()
                    .into();
            }
            v
        })
        .collect();
    let doc = serde_json::json!({"initial_size": n, "steps": steps});
    nbcover::ExecutionScript::from_json(p, &doc.to_string()).unwrap()
}

/// A small corpus of random wait-only protocols.
pub fn corpus(count: u64, max_states: usize, max_messages: usize, rdv_only: bool, salt: u64) -> Vec<Protocol> {
    use nbcover::reductions::{random_protocol, RandomParams};
    (0..count)
        .map(|i| {
            let seed = salt * 1_000_003 + i;
            let n_states = 2 + (i as usize % (max_states - 1));
            let n_messages = 1 + (i as usize / 3 % max_messages);
            let density = [0.05, 0.1, 0.15, 0.2][(i / 7 % 4) as usize];
            random_protocol(
                RandomParams { n_states, n_messages, density, rdv_only },
                seed,
            )
        })
        .collect()
}
