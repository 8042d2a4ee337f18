use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{syntax, ReductionError};
use crate::parse::{is_ident, logical_lines};
use crate::protocol::{Protocol, ProtocolBuilder, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOp {
    And,
    Or,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub op: GateOp,
    /// Two operands for AND/OR, one for NOT.
    pub operands: Vec<String>,
    pub output: String,
}

/// An acyclic circuit with an input assignment and the output value to test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub inputs: Vec<(String, bool)>,
    pub gates: Vec<Gate>,
    pub output: String,
    pub target: bool,
}

fn bool_tok(line: usize, s: &str) -> Result<bool, ReductionError> {
    match s {
        "T" => Ok(true),
        "F" => Ok(false),
        _ => Err(syntax(line, format!("expected T or F, got {s:?}"))),
    }
}

fn tf(b: bool) -> &'static str {
    if b {
        "T"
    } else {
        "F"
    }
}

impl Circuit {
    /// Checks that operands refer to earlier entries and the output is the
    /// last gate (or an input when there are no gates).
    pub fn validate(&self) -> Result<(), ReductionError> {
        let mut known: Vec<&str> = Vec::new();
        for (v, _) in &self.inputs {
            if known.contains(&v.as_str()) {
                return Err(ReductionError::Invalid(format!("{v} defined twice")));
            }
            known.push(v);
        }
        for g in &self.gates {
            let arity = if g.op == GateOp::Not { 1 } else { 2 };
            if g.operands.len() != arity {
                return Err(ReductionError::Invalid(format!(
                    "gate {} has {} operands",
                    g.output,
                    g.operands.len()
                )));
            }
            for x in &g.operands {
                if !known.contains(&x.as_str()) {
                    return Err(ReductionError::Invalid(format!(
                        "gate {} uses undefined {x}",
                        g.output
                    )));
                }
            }
            if known.contains(&g.output.as_str()) {
                return Err(ReductionError::Invalid(format!("{} defined twice", g.output)));
            }
            known.push(&g.output);
        }
        let expected = match self.gates.last() {
            Some(g) => g.output == self.output,
            None => self.inputs.iter().any(|(v, _)| *v == self.output),
        };
        if !expected {
            return Err(ReductionError::Invalid(format!(
                "output {} must be the last gate",
                self.output
            )));
        }
        Ok(())
    }

    /// Renders the circuit spec file format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (v, b) in &self.inputs {
            let _ = writeln!(out, "input {v} {}", tf(*b));
        }
        for g in &self.gates {
            let op = match g.op {
                GateOp::And => "AND",
                GateOp::Or => "OR",
                GateOp::Not => "NOT",
            };
            let _ = writeln!(out, "gate {} {op} {}", g.output, g.operands.join(" "));
        }
        let _ = writeln!(out, "output {} {}", self.output, tf(self.target));
        out
    }
}

/// Parses `input v T|F`, `gate o AND|OR x y`, `gate o NOT x`, `output o T|F`.
pub fn parse_circuit(text: &str) -> Result<Circuit, ReductionError> {
    let mut c = Circuit {
        inputs: Vec::new(),
        gates: Vec::new(),
        output: String::new(),
        target: false,
    };
    let mut seen_output = false;
    for (line, toks) in logical_lines(text) {
        for t in &toks[1..] {
            if !is_ident(t) {
                return Err(syntax(line, format!("invalid identifier {t:?}")));
            }
        }
        match (toks[0], toks.len()) {
            ("input", 3) => c.inputs.push((toks[1].to_string(), bool_tok(line, toks[2])?)),
            ("gate", 5) if matches!(toks[2], "AND" | "OR") => c.gates.push(Gate {
                op: if toks[2] == "AND" { GateOp::And } else { GateOp::Or },
                operands: vec![toks[3].to_string(), toks[4].to_string()],
                output: toks[1].to_string(),
            }),
            ("gate", 4) if toks[2] == "NOT" => c.gates.push(Gate {
                op: GateOp::Not,
                operands: vec![toks[3].to_string()],
                output: toks[1].to_string(),
            }),
            ("output", 3) => {
                if seen_output {
                    return Err(syntax(line, "duplicate output"));
                }
                seen_output = true;
                c.output = toks[1].to_string();
                c.target = bool_tok(line, toks[2])?;
            }
            _ => return Err(syntax(line, "unrecognized circuit line")),
        }
    }
    if !seen_output {
        return Err(ReductionError::Invalid("missing output line".into()));
    }
    c.validate()?;
    Ok(c)
}

/// Evaluates every input and gate output in order.
pub fn eval_circuit(c: &Circuit) -> BTreeMap<String, bool> {
    let mut vals: BTreeMap<String, bool> = c.inputs.iter().cloned().collect();
    for g in &c.gates {
        let x = |i: usize| vals[&g.operands[i]];
        let v = match g.op {
            GateOp::And => x(0) && x(1),
            GateOp::Or => x(0) || x(1),
            GateOp::Not => !x(0),
        };
        vals.insert(g.output.clone(), v);
    }
    vals
}

fn msg(x: &str, b: bool) -> String {
    format!("{x}_{}", tf(b))
}

fn build(c: &Circuit, rdv: bool) -> Result<(Protocol, StateId), ReductionError> {
    c.validate()?;
    if c.gates.is_empty() {
        return Err(ReductionError::Invalid(
            "the reduction needs at least one gate".into(),
        ));
    }
    let emit = |b: &mut ProtocolBuilder, src: &str, m: &str, dst: &str| {
        if rdv {
            b.send(src, m, dst)
        } else {
            b.broadcast(src, m, dst)
        }
    };
    let name = if rdv { "cvp_rdv" } else { "cvp" };
    let mut b = ProtocolBuilder::new(name, "q_in");
    for (v, val) in &c.inputs {
        emit(&mut b, "q_in", &msg(v, *val), "q_in");
    }
    for (j, g) in c.gates.iter().enumerate() {
        let j = j + 1;
        let s = |suffix: &str| format!("g{j}_{suffix}");
        let (q0, top, one, bot) = (s("0"), s("top"), s("1"), s("bot"));
        b.internal("q_in", &q0);
        match g.op {
            GateOp::Or | GateOp::And => {
                // OR short-circuits on ⊤, AND on ⊥.
                let short = g.op == GateOp::Or;
                let (hit, full) = if short { (&top, &bot) } else { (&bot, &top) };
                for x in &g.operands {
                    b.receive(&q0, &msg(x, short), hit);
                }
                b.receive(&q0, &msg(&g.operands[0], !short), &one);
                b.receive(&one, &msg(&g.operands[1], !short), full);
            }
            GateOp::Not => {
                b.receive(&q0, &msg(&g.operands[0], false), &top);
                b.receive(&q0, &msg(&g.operands[0], true), &bot);
            }
        }
        emit(&mut b, &top, &msg(&g.output, true), &top);
        emit(&mut b, &bot, &msg(&g.output, false), &bot);
    }
    let m = c.gates.len();
    let target = format!("g{m}_{}", if c.target { "top" } else { "bot" });
    let p = b
        .finish()
        .map_err(|e| ReductionError::Invalid(e.to_string()))?;
    let t = p.state_id(&target).expect("target state exists");
    Ok((p, t))
}

/// The broadcast protocol whose target state is coverable iff the circuit's
/// output evaluates to the target value.
pub fn cvp_to_protocol(c: &Circuit) -> Result<(Protocol, StateId), ReductionError> {
    build(c, false)
}

/// As [`cvp_to_protocol`] with every broadcast replaced by a send.
pub fn cvp_to_rdv_protocol(c: &Circuit) -> Result<(Protocol, StateId), ReductionError> {
    build(c, true)
}

/// A seeded random circuit with 1..=`max_inputs` inputs and 1..=`max_gates` gates.
pub fn random_circuit(seed: u64, max_inputs: usize, max_gates: usize) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = rng.gen_range(1..=max_inputs.max(1));
    let n_gates = rng.gen_range(1..=max_gates.max(1));
    let inputs: Vec<(String, bool)> = (1..=n_in)
        .map(|i| (format!("v{i}"), rng.gen_bool(0.5)))
        .collect();
    let mut names: Vec<String> = inputs.iter().map(|(v, _)| v.clone()).collect();
    let mut gates = Vec::new();
    for j in 1..=n_gates {
        let op = match rng.gen_range(0..3) {
            0 => GateOp::And,
            1 => GateOp::Or,
            _ => GateOp::Not,
        };
        let arity = if op == GateOp::Not { 1 } else { 2 };
        // Bias operands toward recent outputs so gates chain.
        let operands = (0..arity)
            .map(|_| {
                let lo = if rng.gen_bool(0.6) {
                    names.len().saturating_sub(2)
                } else {
                    0
                };
                names[rng.gen_range(lo..names.len())].clone()
            })
            .collect();
        let output = format!("o{j}");
        gates.push(Gate {
            op,
            operands,
            output: output.clone(),
        });
        names.push(output);
    }
    Circuit {
        inputs,
        output: format!("o{n_gates}"),
        gates,
        target: rng.gen_bool(0.5),
    }
}
