mod common;

use std::collections::BTreeSet;

use common::*;
use nbcover::semantics::apply_step;
use nbcover::{
    cover_query, explore, monotone_lift, replay, successors, Configuration, CoverVerdict,
    ExecutionScript, Label, Limits, Receivers, StepKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn results(p: &nbcover::Protocol, c: &Configuration, t: &str) -> BTreeSet<String> {
    successors(p, c)
        .into_iter()
        .filter(|o| p.transition_text(p.transition(o.transition)) == t)
        .map(|o| o.result.display(p))
        .collect()
}

#[test]
fn send_pairs_with_one_receiver() {
    let p = fig("p");
    let c = conf(&p, "q1:1,q_in:2");
    assert_eq!(
        results(&p, &c, "q_in !b q4"),
        BTreeSet::from(["{q_in, q4, q2}".to_string()])
    );
    let kinds: BTreeSet<StepKind> = successors(&p, &c)
        .into_iter()
        .filter(|o| p.transition_text(p.transition(o.transition)) == "q_in !b q4")
        .map(|o| o.kind)
        .collect();
    assert_eq!(kinds, BTreeSet::from([StepKind::RendezVous]));
}

#[test]
fn send_without_receiver_is_lost() {
    let p = fig("p");
    let c = conf(&p, "q_in:1");
    let out: Vec<_> = successors(&p, &c)
        .into_iter()
        .filter(|o| p.transition_text(p.transition(o.transition)) == "q_in !b q4")
        .collect();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].kind, StepKind::NonBlockingSend);
    assert_eq!(out[0].receivers, Receivers::None);
    assert_eq!(out[0].result, conf(&p, "q4:1"));
}

#[test]
fn broadcast_reaches_every_receiver() {
    let p = fig("p");
    let c = conf(&p, "q2:1,q4:2");
    assert_eq!(
        results(&p, &c, "q2 !!c q1"),
        BTreeSet::from(["{q1, 2·q5}".to_string()])
    );
}

#[test]
fn broadcast_splits_over_receptions() {
    // Two q1 processes receiving b may each pick either reception.
    let p = nbcover::parse_protocol(
        "protocol split\ninit q0\nq0 !!b q0\nq0 !a q1\nq1 ?b q2\nq1 ?b q3\n",
    )
    .unwrap();
    let c = conf(&p, "q0:1,q1:2");
    let got = results(&p, &c, "q0 !!b q0");
    assert_eq!(got.len(), 3, "{got:?}");
}

#[test]
fn sender_does_not_receive_its_own_broadcast() {
    let p = nbcover::parse_protocol("protocol self\ninit q0\nq0 !!a q1\nq1 ?a q2\n").unwrap();
    let out = successors(&p, &conf(&p, "q0:1"));
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].result, conf(&p, "q1:1"));
}

#[test]
fn running_example_execution_replays() {
    let p = fig("p");
    let s = script(
        &p,
        3,
        &[
            ("q_in !!a q1", &[]),
            ("q_in !b q4", &[("q1 ?b q2", 1)]),
            ("q_in !b q4", &[]),
            ("q2 !!c q1", &[("q4 ?c q5", 2)]),
            ("q5 !!a q6", &[("q1 ?a q3", 1)]),
        ],
    );
    let trace = replay(&p, &s).unwrap();
    let shown: Vec<String> = trace.iter().map(|c| c.display(&p)).collect();
    assert_eq!(
        shown,
        [
            "{3·q_in}",
            "{2·q_in, q1}",
            "{q_in, q4, q2}",
            "{2·q4, q2}",
            "{q1, 2·q5}",
            "{q3, q5, q6}"
        ]
    );
}

#[test]
fn replay_reports_first_bad_step() {
    let p = fig("p");
    // The non-blocking send is illegal while q1 can receive b.
    let s = script(&p, 2, &[("q_in !!a q1", &[]), ("q_in !b q4", &[])]);
    let err = replay(&p, &s).unwrap_err();
    assert_eq!(err.index, 1);
    let empty = ExecutionScript::empty(0);
    assert!(replay(&p, &empty).is_err());
}

fn p_prime_execution(verbatim: bool) -> ExecutionScript {
    let p = fig("p_prime");
    let mut steps: Vec<(&str, &[(&str, u32)])> = vec![
        ("q_in !!tau q4", &[]),
        ("q_in !!tau q4", &[]),
        ("q_in !!tau q4", &[]),
        ("q_in !!a q1", &[("q4 ?a q5", 3)]),
    ];
    if verbatim {
        steps.push(("q_in !!a q1", &[]));
        steps.push(("q5 !!c q6", &[("q1 ?c q2", 1)]));
    } else {
        steps.push(("q5 !!c q6", &[("q1 ?c q2", 1)]));
        steps.push(("q_in !!a q1", &[]));
    }
    steps.extend_from_slice(&[
        ("q2 !b q3", &[("q6 ?b q7", 1)][..]),
        ("q5 !!c q6", &[("q1 ?c q2", 1)]),
        ("q2 !b q3", &[("q6 ?b q7", 1)]),
        ("q5 !!c q6", &[]),
    ]);
    script(&p, 5, &steps)
}

#[test]
fn tracked_and_untracked_execution_replays() {
    let p = fig("p_prime");
    let trace = replay(&p, &p_prime_execution(false)).unwrap();
    let last = trace.last().unwrap();
    assert_eq!(*last, conf(&p, "q3:2,q6:1,q7:2"));
    assert!(conf(&p, "q3:2,q6:1").le(last));
}

#[test]
fn partial_broadcast_delivery_is_rejected() {
    // Delivering c to only one of two q1 processes is not a legal step.
    let p = fig("p_prime");
    let err = replay(&p, &p_prime_execution(true)).unwrap_err();
    assert_eq!(err.index, 5);
}

#[test]
fn reception_outside_wait_only_blocks_coverage() {
    let p = fig("p_dashed");
    let rs = explore(&p, 6, unlimited());
    assert!(!rs.truncated);
    let q1 = p.state_id("q1").unwrap();
    let q2 = p.state_id("q2").unwrap();
    assert!(rs.configs.iter().all(|c| c.get(q2) < 2));
    assert!(rs.configs.iter().all(|c| c.get(q1) == 0 || c.get(q2) == 0));
    for n in 2..=6 {
        let v = cover_query(&p, n, &conf(&p, "q2:2"), unlimited()).unwrap();
        assert_eq!(v, CoverVerdict::NotCovered);
    }
}

#[test]
fn cover_query_witness_replays() {
    let p = fig("p");
    let target = conf(&p, "q3:1,q6:1");
    let CoverVerdict::Covered(s) = cover_query(&p, 3, &target, unlimited()).unwrap() else {
        panic!("expected a witness");
    };
    assert!(target.le(replay(&p, &s).unwrap().last().unwrap()));
    let two = cover_query(&p, 2, &target, unlimited()).unwrap();
    assert_eq!(two.covered(), Some(oracle_covers(&p, 2, &target)));
    assert_eq!(two.covered(), Some(true));
    assert!(cover_query(&p, 1, &target, unlimited()).is_err());
    let trivial = cover_query(&p, 1, &conf(&p, "q_in:1"), unlimited()).unwrap();
    assert_eq!(trivial, CoverVerdict::Covered(ExecutionScript::empty(1)));
}

#[test]
fn limits_make_queries_inconclusive() {
    let p = fig("p");
    let tight = Limits {
        max_states: 3,
        max_depth: None,
    };
    let v = cover_query(&p, 4, &conf(&p, "q3:1,q6:1"), tight).unwrap();
    assert_eq!(v, CoverVerdict::Unknown);
    assert!(explore(&p, 4, tight).truncated);
    let shallow = Limits {
        max_states: 1 << 20,
        max_depth: Some(1),
    };
    assert!(explore(&p, 4, shallow).truncated);
}

#[test]
fn explore_matches_oracle_reachability() {
    for (i, p) in corpus(40, 5, 3, false, 11).iter().enumerate() {
        for n in 1..=3 {
            let rs = explore(p, n, unlimited());
            let lib: std::collections::HashSet<Dense> =
                rs.configs.iter().map(|c| dense(p, c)).collect();
            assert_eq!(lib, oracle_reach(p, n), "protocol {i}, n={n}\n{}", p.render());
            for (j, c) in rs.configs.iter().enumerate() {
                let trace = replay(p, &rs.script_to(j)).unwrap();
                assert_eq!(trace.last().unwrap(), c);
            }
        }
    }
}

#[test]
fn successors_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in corpus(60, 5, 3, false, 12) {
        for _ in 0..20 {
            let size = rng.gen_range(1..=4);
            let all = all_configs(p.num_states(), size);
            let d = &all[rng.gen_range(0..all.len())];
            let c = to_config(d);
            let lib: BTreeSet<Dense> = successors(&p, &c).iter().map(|o| dense(&p, &o.result)).collect();
            assert_eq!(lib, oracle_successors(&p, d), "{}\nfrom {}", p.render(), c.display(&p));
            for o in successors(&p, &c) {
                assert_eq!(apply_step(&p, &c, &o.step()).unwrap(), o.result);
            }
        }
    }
}

#[test]
fn send_outcomes_are_all_rendezvous_or_one_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for p in corpus(60, 5, 3, false, 13) {
        for _ in 0..20 {
            let all = all_configs(p.num_states(), rng.gen_range(1..=4));
            let c = to_config(&all[rng.gen_range(0..all.len())]);
            for (t, tr) in p.transitions().iter().enumerate() {
                if !matches!(tr.label, Label::Send(_)) {
                    continue;
                }
                let kinds: Vec<StepKind> = nbcover::semantics::successors_via(&p, &c, t)
                    .iter()
                    .map(|o| o.kind)
                    .collect();
                let lost = kinds.iter().filter(|&&k| k == StepKind::NonBlockingSend).count();
                assert!(lost == 0 || kinds.len() == 1, "{kinds:?}");
            }
        }
    }
}

#[test]
fn steps_preserve_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in corpus(50, 5, 3, false, 14) {
        let mut c = Configuration::uniform(p.initial(), rng.gen_range(1..=6));
        for _ in 0..40 {
            let out = successors(&p, &c);
            if out.is_empty() {
                break;
            }
            let next = out[rng.gen_range(0..out.len())].result.clone();
            assert_eq!(next.size(), c.size());
            c = next;
        }
    }
}

#[test]
fn steps_are_monotone() {
    // Adding processes never disables a step's effect on the rest.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for p in corpus(40, 4, 3, false, 15) {
        for _ in 0..10 {
            let all = all_configs(p.num_states(), rng.gen_range(1..=3));
            let c = to_config(&all[rng.gen_range(0..all.len())]);
            for extra_size in 1..=2 {
                for e in all_configs(p.num_states(), extra_size) {
                    let d = c.plus(&to_config(&e));
                    for o in successors(&p, &c) {
                        assert!(
                            successors(&p, &d).iter().any(|od| o.result.le(&od.result)),
                            "{}\n{} -> {} not matched from {}",
                            p.render(),
                            c.display(&p),
                            o.result.display(&p),
                            d.display(&p)
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn lifted_runs_dominate_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in corpus(60, 5, 3, false, 16) {
        let n = rng.gen_range(1..=4);
        let mut trace = vec![Configuration::uniform(p.initial(), n)];
        for _ in 0..15 {
            let out = successors(&p, trace.last().unwrap());
            if out.is_empty() {
                break;
            }
            trace.push(out[rng.gen_range(0..out.len())].result.clone());
        }
        let extra = rng.gen_range(1..=3);
        let d0 = Configuration::uniform(p.initial(), n + extra);
        let lifted = monotone_lift(&p, &trace, &d0).unwrap();
        assert_eq!(lifted.len(), trace.len());
        for (c, d) in trace.iter().zip(&lifted) {
            assert!(c.le(d));
        }
        for w in lifted.windows(2) {
            assert!(successors(&p, &w[0]).iter().any(|o| o.result == w[1]));
        }
    }
}

#[test]
fn lift_rejects_unrelated_traces() {
    let p = fig("p");
    let trace = vec![conf(&p, "q_in:1"), conf(&p, "q6:1")];
    assert!(monotone_lift(&p, &trace, &conf(&p, "q_in:2")).is_err());
    let ok = vec![conf(&p, "q_in:1")];
    assert!(monotone_lift(&p, &ok, &conf(&p, "q4:1")).is_err());
}

#[test]
fn rendezvous_runs_lose_at_most_two_per_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for p in corpus(60, 5, 3, true, 17) {
        let n = rng.gen_range(1..=5);
        let mut trace = vec![Configuration::uniform(p.initial(), n)];
        for _ in 0..12 {
            let out = successors(&p, trace.last().unwrap());
            if out.is_empty() {
                break;
            }
            trace.push(out[rng.gen_range(0..out.len())].result.clone());
        }
        for (l, c) in trace.iter().enumerate() {
            for q in 0..p.num_states() {
                let before = i64::from(trace[0].get(q));
                assert!(i64::from(c.get(q)) >= before - 2 * l as i64);
            }
        }
        // Padding the start with x extra copies keeps x of them on q_in.
        let x = 2;
        let d0 = Configuration::uniform(p.initial(), n + 2 * (trace.len() as u32 - 1) + x);
        let lifted = monotone_lift(&p, &trace, &d0).unwrap();
        assert!(lifted.last().unwrap().get(p.initial()) >= x);
    }
}

#[test]
fn script_json_round_trips() {
    let p = fig("p_prime");
    let s = p_prime_execution(false);
    let text = s.to_json(&p).to_string();
    assert_eq!(ExecutionScript::from_json(&p, &text).unwrap(), s);
    assert!(ExecutionScript::from_json(&p, "{}").is_err());
    let bad = r#"{"initial_size":1,"steps":[{"t":["q_in","!","zz","q4"]}]}"#;
    assert!(ExecutionScript::from_json(&p, bad).is_err());
}
