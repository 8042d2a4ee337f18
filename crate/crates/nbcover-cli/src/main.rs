//! `nbcover`: coverability checks for parameterized broadcast / rendez-vous protocols.
//!
//! Exit codes: 0 coverable or success, 1 not coverable, 2 input or usage
//! error, 3 inconclusive (exploration limits hit).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nbcover::conf_cover::{check_conf_cover, cutoff_bound};
use nbcover::reductions::{
    cvp_to_protocol, cvp_to_rdv_protocol, dfa_intersection_nonempty, dfa_intersection_to_protocol,
    eval_circuit, parse_circuit, parse_dfa_set, random_protocol, RandomParams,
};
use nbcover::state_cover::{saturate, Justification, WitnessBuilder};
use nbcover::tokenset::{fixpoint, require_rdv, FixpointTrace};
use nbcover::{
    classify, cover_query, explore, parse_protocol, replay, Configuration, CoverVerdict,
    ExecutionScript, Limits, Protocol,
};

const EXIT_COVERED: u8 = 0;
const EXIT_NOT_COVERED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "nbcover",
    version,
    about = "Coverability for parameterized broadcast and rendez-vous protocols"
)]
struct Cli {
    /// Print a JSON verdict document instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural classification (wait-only, rendez-vous only, ...).
    Classify { file: PathBuf },
    /// Is a single state coverable? (wait-only protocols)
    StateCover {
        file: PathBuf,
        #[arg(long)]
        state: String,
        /// Print a replay-verified execution reaching the state.
        #[arg(long)]
        witness: bool,
    },
    /// Is a configuration such as "q3:2,q6:1" coverable?
    ConfCover {
        file: PathBuf,
        #[arg(long)]
        target: String,
        /// Force a decision procedure (default: tokenset when applicable, else abstract).
        #[arg(long, value_enum)]
        engine: Option<Engine>,
        /// Largest network size tried by the oracle engine.
        #[arg(long, default_value_t = 8)]
        max_n: u32,
        /// Per-size configuration budget of the oracle engine.
        #[arg(long, default_value_t = 1 << 20)]
        max_states: usize,
    },
    /// Token-set fixpoint (wait-only rendez-vous protocols).
    Tokenset {
        file: PathBuf,
        /// Show the rule firings of every application.
        #[arg(long)]
        trace: bool,
    },
    /// Explicit-state exploration from n processes.
    Explore {
        file: PathBuf,
        #[arg(short = 'n')]
        n: u32,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 1 << 20)]
        max_states: usize,
    },
    /// Generate protocols from reductions or at random.
    #[command(subcommand)]
    Gen(Gen),
}

#[derive(Subcommand)]
enum Gen {
    /// Protocol from a circuit; its target state is coverable iff the output has the claimed value.
    Cvp {
        spec: PathBuf,
        /// Use sends instead of broadcasts.
        #[arg(long)]
        rdv: bool,
    },
    /// Protocol from a DFA set; its target is coverable iff the intersection is non-empty.
    Dfa { spec: PathBuf },
    /// Seeded random wait-only protocol.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        states: usize,
        #[arg(long)]
        messages: usize,
        #[arg(long)]
        rdv: bool,
        #[arg(long, default_value_t = RandomParams::default().density)]
        density: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Abstract,
    Tokenset,
    Oracle,
}

impl Engine {
    fn name(self) -> &'static str {
        match self {
            Engine::Abstract => "abstract",
            Engine::Tokenset => "tokenset",
            Engine::Oracle => "oracle",
        }
    }
}

/// An input or usage error, with an optional hint.
struct Failure {
    message: String,
    hint: Option<String>,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            message: e.to_string(),
            hint: None,
        }
    }
}

fn fail_with_hint(e: impl std::fmt::Display, hint: &str) -> Failure {
    Failure {
        message: e.to_string(),
        hint: Some(hint.to_string()),
    }
}

/// What a command produced.
struct Outcome {
    code: u8,
    text: String,
    result: Value,
    protocol: Option<Protocol>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let start = Instant::now();
    match run(&cli.command) {
        Ok(out) => {
            if cli.json {
                let doc = json!({
                    "command": argv.get(1..).unwrap_or_default(),
                    "protocol": out.protocol.as_ref().map(digest),
                    "result": out.result,
                    "exit_code": out.code,
                    "elapsed_ms": start.elapsed().as_secs_f64() * 1e3,
                });
                emit(&format!(
                    "{}\n",
                    serde_json::to_string_pretty(&doc).expect("JSON values serialize")
                ));
            } else {
                emit(&out.text);
            }
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            if let Some(h) = f.hint {
                eprintln!("hint: {h}");
            }
            ExitCode::from(EXIT_INPUT)
        }
    }
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn run(cmd: &Command) -> Result<Outcome, Failure> {
    match cmd {
        Command::Classify { file } => cmd_classify(load(file)?),
        Command::StateCover {
            file,
            state,
            witness,
        } => cmd_state_cover(load(file)?, state, *witness),
        Command::ConfCover {
            file,
            target,
            engine,
            max_n,
            max_states,
        } => {
            let p = load(file)?;
            let c_f = Configuration::parse_target(&p, target)?;
            cmd_conf_cover(p, c_f, *engine, *max_n, limits(*max_states))
        }
        Command::Tokenset { file, trace } => cmd_tokenset(load(file)?, *trace),
        Command::Explore {
            file,
            n,
            target,
            max_states,
        } => {
            let p = load(file)?;
            let target = target
                .as_deref()
                .map(|t| Configuration::parse_target(&p, t))
                .transpose()?;
            cmd_explore(p, *n, target, limits(*max_states))
        }
        Command::Gen(g) => cmd_gen(g),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::from(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Protocol, Failure> {
    parse_protocol(&read(path)?).map_err(|e| Failure::from(format!("{}: {e}", path.display())))
}

fn limits(max_states: usize) -> Limits {
    Limits {
        max_states,
        max_depth: None,
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn digest(p: &Protocol) -> Value {
    let r = classify(p);
    json!({
        "name": p.name(),
        "states": p.num_states(),
        "messages": p.num_messages(),
        "transitions": p.transitions().len(),
        "classification": {
            "wait_only": r.wait_only,
            "rdv_only": r.rdv_only,
            "broadcast_only": r.broadcast_only,
            "initial_is_action": r.initial_is_action,
            "action_states": p.set_names(&r.action_states),
            "waiting_states": p.set_names(&r.waiting_states),
            "offending_states": p.set_names(&r.offending_states),
        },
    })
}

fn cmd_classify(p: Protocol) -> Result<Outcome, Failure> {
    let r = classify(&p);
    let mut text = format!(
        "protocol {}: {} states, {} messages, {} transitions\n",
        p.name(),
        p.num_states(),
        p.num_messages(),
        p.transitions().len()
    );
    text += &format!("wait-only: {}\n", yes(r.wait_only));
    text += &format!("action states: {}\n", p.format_set(&r.action_states));
    text += &format!("waiting states: {}\n", p.format_set(&r.waiting_states));
    if !r.wait_only {
        text += &format!("offending states: {}\n", p.format_set(&r.offending_states));
    }
    text += &format!("rendez-vous only: {}\n", yes(r.rdv_only));
    text += &format!("broadcast only: {}\n", yes(r.broadcast_only));
    Ok(Outcome {
        code: EXIT_COVERED,
        text,
        result: json!({}),
        protocol: Some(p),
    })
}

/// Replays `script` and checks that its last configuration covers `target`.
fn verified(
    p: &Protocol,
    script: &ExecutionScript,
    target: &Configuration,
) -> Result<Vec<Configuration>, Failure> {
    let trace = replay(p, script)
        .map_err(|e| Failure::from(format!("internal error: witness does not replay: {e}")))?;
    if !target.le(trace
        .last()
        .expect("replay yields the initial configuration"))
    {
        return Err(Failure::from(
            "internal error: witness does not cover the target",
        ));
    }
    Ok(trace)
}

fn render_run(p: &Protocol, script: &ExecutionScript, trace: &[Configuration]) -> String {
    let mut text = format!("  {}\n", trace[0].display(p));
    for (step, c) in script.steps.iter().zip(&trace[1..]) {
        text += &format!(
            "  --[{}]--> {}\n",
            p.transition_text(p.transition(step.transition)),
            c.display(p)
        );
    }
    text
}

fn justification_text(p: &Protocol, j: &Justification) -> String {
    let t = |t| p.transition_text(p.transition(t));
    match *j {
        Justification::Initial => "initial".into(),
        Justification::Action { transition } => format!("{} via {}", j.rule_name(), t(transition)),
        Justification::RendezVousPair { send, reception }
        | Justification::BroadcastPair {
            broadcast: send,
            reception,
        } => {
            format!("{} via {} / {}", j.rule_name(), t(send), t(reception))
        }
    }
}

fn cmd_state_cover(p: Protocol, state: &str, witness: bool) -> Result<Outcome, Failure> {
    let q = p.require_state(state)?;
    let explore_hint =
        format!("use `nbcover explore FILE -n N --target {state}` for a bounded search");
    let sat = saturate(&p).map_err(|e| fail_with_hint(e, &explore_hint))?;
    let covered = sat.coverable.contains(q);
    let bound = sat.per_state_bound[q];

    let mut text = match bound {
        Some(b) if covered => format!("{state} is coverable (with at most {b} processes)\n"),
        _ => format!("{state} is not coverable\n"),
    };
    text += &format!("coverable states: {}\n", p.format_set(&sat.coverable));
    let mut rounds = Vec::new();
    for r in &sat.rounds {
        let added: Vec<String> = r
            .added
            .iter()
            .map(|(q, j)| format!("{} ({})", p.state_name(*q), justification_text(&p, j)))
            .collect();
        text += &format!("round {}: {}\n", r.round, added.join(", "));
        rounds.push(json!({
            "round": r.round,
            "added": r.added.iter().map(|(q, _)| p.state_name(*q)).collect::<Vec<_>>(),
            "rule": r.added.iter().map(|(q, j)| (p.state_name(*q).to_string(), json!(j.rule_name()))).collect::<serde_json::Map<_, _>>(),
        }));
    }
    let bounds: serde_json::Map<String, Value> = sat
        .coverable
        .ones()
        .filter_map(|q| Some((p.state_name(q).to_string(), json!(sat.per_state_bound[q]?))))
        .collect();

    let mut script_json = Value::Null;
    if witness && covered {
        let script = WitnessBuilder::new(&p, &sat)
            .witness(q)
            .ok_or("internal error: no witness for a coverable state")?;
        let trace = verified(&p, &script, &Configuration::from_states([q]))?;
        text += &format!(
            "witness ({} processes, {} steps):\n",
            script.initial_size,
            script.steps.len()
        );
        text += &render_run(&p, &script, &trace);
        script_json = script.to_json(&p);
    }
    let result = json!({
        "state": state,
        "covered": covered,
        "bound": bound.filter(|_| covered),
        "coverable": p.set_names(&sat.coverable),
        "rounds": rounds,
        "bounds": bounds,
        "witness": script_json,
    });
    Ok(Outcome {
        code: if covered {
            EXIT_COVERED
        } else {
            EXIT_NOT_COVERED
        },
        text,
        result,
        protocol: Some(p),
    })
}

fn cmd_conf_cover(
    p: Protocol,
    c_f: Configuration,
    engine: Option<Engine>,
    max_n: u32,
    limits: Limits,
) -> Result<Outcome, Failure> {
    let report = classify(&p);
    let engine = match engine {
        Some(e) => e,
        None if require_rdv(&p).is_ok() => Engine::Tokenset,
        None => Engine::Abstract,
    };
    let oracle_hint = "use `--engine oracle` or `nbcover explore` for a bounded search";
    let mut result = json!({
        "engine": engine.name(),
        "target": c_f.named(&p),
        "covered": null,
        "cutoff_bound": report.wait_only.then(|| cutoff_bound(&p, &c_f).to_string()),
        "abstract_path": null,
    });
    let mut text = format!("target {} (engine: {})\n", c_f.display(&p), engine.name());
    let covered = match engine {
        Engine::Abstract => {
            let r = check_conf_cover(&p, &c_f).map_err(|e| fail_with_hint(e, oracle_hint))?;
            if let Some(path) = &r.abstract_path {
                text += "abstract path:\n";
                let mut steps = Vec::new();
                for (i, s) in path.iter().enumerate() {
                    let t = p.transition_text(p.transition(s.transition));
                    text += &format!(
                        "  {:>2}. {:<6} {:<16} -> {}\n",
                        i + 1,
                        s.kind.name(),
                        t,
                        s.to.display(&p)
                    );
                    steps.push(json!({
                        "kind": s.kind.name(),
                        "transition": t,
                        "M": s.to.m_part.named(&p),
                        "S": p.set_names(&s.to.s_part),
                    }));
                }
                result["abstract_path"] = json!(steps);
            }
            result["visited"] = json!(r.visited);
            Some(r.covered)
        }
        Engine::Tokenset => {
            let trace = fixpoint(&p).map_err(|e| {
                fail_with_hint(
                    e,
                    "use `--engine abstract` for wait-only protocols with broadcasts",
                )
            })?;
            let gf = trace.last();
            let covered = nbcover::tokenset::respects(&p, gf, &c_f);
            text += &format!(
                "fixpoint after {} iterates: {}\n",
                trace.iterates.len(),
                gf.display(&p)
            );
            result["fixpoint"] = gf.to_json(&p);
            Some(covered)
        }
        Engine::Oracle => {
            let mut verdict = None;
            let mut truncated = false;
            for n in c_f.size()..=max_n.max(c_f.size()) {
                match cover_query(&p, n, &c_f, limits)? {
                    CoverVerdict::Covered(script) => {
                        let trace = verified(&p, &script, &c_f)?;
                        text +=
                            &format!("witness ({n} processes, {} steps):\n", script.steps.len());
                        text += &render_run(&p, &script, &trace);
                        result["witness"] = script.to_json(&p);
                        verdict = Some(true);
                        break;
                    }
                    CoverVerdict::NotCovered => {}
                    CoverVerdict::Unknown => truncated = true,
                }
            }
            result["max_n"] = json!(max_n);
            result["truncated"] = json!(truncated);
            if verdict.is_none() {
                text += &format!("no covering run with up to {max_n} processes\n");
            }
            verdict
        }
    };
    result["covered"] = json!(covered);
    text += match covered {
        Some(true) => "covered\n",
        Some(false) => "not covered\n",
        None => "inconclusive\n",
    };
    Ok(Outcome {
        code: match covered {
            Some(true) => EXIT_COVERED,
            Some(false) => EXIT_NOT_COVERED,
            None => EXIT_INCONCLUSIVE,
        },
        text,
        result,
        protocol: Some(p),
    })
}

fn trace_json(p: &Protocol, trace: &FixpointTrace) -> Value {
    json!({
        "iterates": trace.iterates.iter().map(|g| g.to_json(p)).collect::<Vec<_>>(),
        "rules": trace
            .applications
            .iter()
            .map(|a| a.firings.iter().map(|f| f.describe(p)).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

fn cmd_tokenset(p: Protocol, show_trace: bool) -> Result<Outcome, Failure> {
    let trace = fixpoint(&p)?;
    let mut text = String::new();
    for (i, g) in trace.iterates.iter().enumerate() {
        text += &format!("γ{i} = {}\n", g.display(&p));
        if show_trace {
            if let Some(app) = trace.applications.get(i) {
                text += &format!("  intermediate: {}\n", app.intermediate.display(&p));
                for f in &app.firings {
                    text += &format!("  {}\n", f.describe(&p));
                }
            }
        }
    }
    text += &format!(
        "fixpoint reached after {} applications\n",
        trace.applications.len()
    );
    Ok(Outcome {
        code: EXIT_COVERED,
        text,
        result: trace_json(&p, &trace),
        protocol: Some(p),
    })
}

fn cmd_explore(
    p: Protocol,
    n: u32,
    target: Option<Configuration>,
    limits: Limits,
) -> Result<Outcome, Failure> {
    if n == 0 {
        return Err(Failure::from("-n must be at least 1"));
    }
    let Some(target) = target else {
        let rs = explore(&p, n, limits);
        let text = format!(
            "{} configurations reachable from {}{}\n",
            rs.len(),
            Configuration::uniform(p.initial(), n).display(&p),
            if rs.truncated { " (truncated)" } else { "" }
        );
        return Ok(Outcome {
            code: if rs.truncated {
                EXIT_INCONCLUSIVE
            } else {
                EXIT_COVERED
            },
            text,
            result: json!({ "n": n, "reachable": rs.len(), "truncated": rs.truncated }),
            protocol: Some(p),
        });
    };
    let verdict = cover_query(&p, n, &target, limits)?;
    let mut result = json!({
        "n": n,
        "target": target.named(&p),
        "covered": verdict.covered(),
        "witness": null,
    });
    let (code, text) = match verdict {
        CoverVerdict::Covered(script) => {
            let trace = verified(&p, &script, &target)?;
            result["witness"] = script.to_json(&p);
            let text = format!(
                "{} is coverable with {n} processes ({} steps):\n{}",
                target.display(&p),
                script.steps.len(),
                render_run(&p, &script, &trace)
            );
            (EXIT_COVERED, text)
        }
        CoverVerdict::NotCovered => (
            EXIT_NOT_COVERED,
            format!(
                "{} is not coverable with {n} processes\n",
                target.display(&p)
            ),
        ),
        CoverVerdict::Unknown => (
            EXIT_INCONCLUSIVE,
            format!(
                "inconclusive: more than {} configurations\n",
                limits.max_states
            ),
        ),
    };
    Ok(Outcome {
        code,
        text,
        result,
        protocol: Some(p),
    })
}

fn generated(
    p: Protocol,
    header: &str,
    target: Option<&Configuration>,
    expected: Option<bool>,
) -> Outcome {
    let mut text = String::new();
    for line in header.lines() {
        text += &format!("# {line}\n");
    }
    text += &p.render();
    let result = json!({
        "protocol": p.render(),
        "target": target.map(|t| target_arg(&p, t)),
        "expected_covered": expected,
    });
    Outcome {
        code: EXIT_COVERED,
        text,
        result,
        protocol: Some(p),
    }
}

/// `--target` syntax for a configuration.
fn target_arg(p: &Protocol, c: &Configuration) -> String {
    c.iter()
        .map(|(q, k)| format!("{}:{k}", p.state_name(q)))
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_gen(g: &Gen) -> Result<Outcome, Failure> {
    match g {
        Gen::Cvp { spec, rdv } => {
            let c = parse_circuit(&read(spec)?)?;
            let value = eval_circuit(&c)[&c.output];
            let (p, q) = if *rdv {
                cvp_to_rdv_protocol(&c)?
            } else {
                cvp_to_protocol(&c)?
            };
            let target = Configuration::from_states([q]);
            let header = format!(
                "target: {} (output {} evaluates to {}; coverable: {})",
                target_arg(&p, &target),
                c.output,
                if value { "T" } else { "F" },
                yes(value == c.target)
            );
            Ok(generated(
                p,
                &header,
                Some(&target),
                Some(value == c.target),
            ))
        }
        Gen::Dfa { spec } => {
            let d = parse_dfa_set(&read(spec)?)?;
            let nonempty = dfa_intersection_nonempty(&d);
            let (p, target) = dfa_intersection_to_protocol(&d)?;
            let header = format!(
                "target: {} (intersection non-empty: {})",
                target_arg(&p, &target),
                yes(nonempty)
            );
            Ok(generated(p, &header, Some(&target), Some(nonempty)))
        }
        Gen::Random {
            seed,
            states,
            messages,
            rdv,
            density,
        } => {
            if *states == 0 || !(0.0..=1.0).contains(density) {
                return Err(Failure::from(
                    "--states must be positive and --density within [0, 1]",
                ));
            }
            let params = RandomParams {
                n_states: *states,
                n_messages: *messages,
                density: *density,
                rdv_only: *rdv,
            };
            let p = random_protocol(params, *seed);
            Ok(generated(
                p,
                &format!("random protocol, seed {seed}"),
                None,
                None,
            ))
        }
    }
}
