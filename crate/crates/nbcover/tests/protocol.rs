mod common;

use common::fig;
use nbcover::{classify, normalize_tau, parse_protocol, receivable, Label, ProtocolError};
use proptest::prelude::*;

#[test]
fn parses_running_example() {
    let p = fig("p");
    assert_eq!(p.num_states(), 7);
    assert_eq!(p.num_messages(), 3);
    assert_eq!(p.state_name(p.initial()), "q_in");
    assert_eq!(p.transitions().len(), 7);
}

#[test]
fn parses_minimal_internal_loop() {
    let p = parse_protocol("protocol X\ninit q0\nq0 tau q0\n").unwrap();
    assert_eq!(p.num_states(), 1);
    assert_eq!(p.num_messages(), 0);
    assert_eq!(p.transitions()[0].label, Label::Internal);
}

#[test]
fn parse_errors() {
    assert_eq!(
        parse_protocol("protocol X\nq0 tau q0\n"),
        Err(ProtocolError::MissingInit)
    );
    assert!(matches!(
        parse_protocol("protocol X\ninit a\ninit b\na tau b\n"),
        Err(ProtocolError::DuplicateInit { line: 3 })
    ));
    assert_eq!(
        parse_protocol("protocol X\ninit a\n# nothing\n"),
        Err(ProtocolError::NoTransitions)
    );
    assert!(matches!(
        parse_protocol("protocol X\ninit a\na !! b\n"),
        Err(ProtocolError::Syntax { line: 3, .. })
    ));
    assert!(matches!(
        parse_protocol("protocol X\ninit a\na ?m b\na ?m b\n"),
        Err(ProtocolError::DuplicateTransition { line: 4 })
    ));
    assert!(matches!(
        parse_protocol("protocol X\ninit a\na tau b\nb !__tau_0 a\n"),
        Err(ProtocolError::TauCollision(_))
    ));
    assert!(matches!(
        parse_protocol("protocol 1x\ninit a\na tau b\n"),
        Err(ProtocolError::Syntax { line: 1, .. })
    ));
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let p = parse_protocol("# header\n\nprotocol X # name\n  init a\n\na !m b # send\n").unwrap();
    assert_eq!(p.transitions().len(), 1);
}

#[test]
fn bang_bang_tau_is_an_ordinary_message() {
    let p = fig("p_prime");
    let tau = p.message_id("tau").unwrap();
    assert_eq!(p.transitions()[0].label, Label::Broadcast(tau));
    assert!(!p.is_received(tau));
    assert_eq!(normalize_tau(&p), p);
}

#[test]
fn normalize_replaces_internal_moves() {
    let p = parse_protocol("protocol X\ninit q0\nq0 ?m q0\nq0 tau q1\n").unwrap();
    let n = normalize_tau(&p);
    let m = n.message_id("__tau_1").unwrap();
    assert_eq!(n.transitions()[1].label, Label::Broadcast(m));
    assert!(!n.has_internal());
    assert!(p.message_id("__tau_1").is_none());
    let (a, b) = (classify(&n), classify(&p));
    assert_eq!((a.wait_only, a.action_states, a.waiting_states), (b.wait_only, b.action_states, b.waiting_states));
}

#[test]
fn classify_running_example() {
    let p = fig("p");
    let r = classify(&p);
    assert!(r.wait_only);
    assert_eq!(r.action_states, common::states(&p, &["q_in", "q2", "q3", "q5", "q6"]));
    assert_eq!(r.waiting_states, common::states(&p, &["q1", "q4"]));
    assert!(r.initial_is_action);
    assert!(!r.rdv_only && !r.broadcast_only);
}

#[test]
fn classify_dashed_variant() {
    let p = fig("p_dashed");
    let r = classify(&p);
    assert!(!r.wait_only);
    assert_eq!(p.set_names(&r.offending_states), ["q2"]);
}

#[test]
fn classify_p1() {
    let r = classify(&fig("p1"));
    assert!(r.wait_only && r.rdv_only);
}

#[test]
fn receivable_sets() {
    let p = fig("p");
    let names = |ms: Vec<usize>| {
        ms.into_iter()
            .map(|m| p.message_name(m).to_string())
            .collect::<std::collections::BTreeSet<_>>()
    };
    assert_eq!(names(receivable(&p, "q1").unwrap()), ["a".to_string(), "b".to_string()].into());
    assert!(receivable(&p, "q_in").unwrap().is_empty());
    assert!(receivable(&p, "nope").is_err());
    let p2 = fig("p2");
    let names2: Vec<_> = receivable(&p2, "p3").unwrap().into_iter().map(|m| p2.message_name(m).to_string()).collect();
    assert_eq!(names2, ["m1", "m2", "m3"]);
}

#[test]
fn figure_files_round_trip() {
    for f in ["p", "p_dashed", "p_prime", "p1", "p2", "wo_rdv_ex1", "wo_rdv_ex2"] {
        let p = fig(f);
        assert_eq!(parse_protocol(&p.render()).unwrap(), p, "{f}");
    }
}

proptest! {
    #[test]
    fn random_protocols_round_trip_and_partition(seed in 0u64..10_000, n in 1usize..7, k in 0usize..4, rdv in any::<bool>()) {
        let params = nbcover::reductions::RandomParams { n_states: n, n_messages: k, density: 0.1, rdv_only: rdv };
        let p = nbcover::reductions::random_protocol(params, seed);
        prop_assert_eq!(parse_protocol(&p.render()).unwrap(), p.clone());
        let r = classify(&p);
        prop_assert!(r.wait_only);
        let mut union = r.action_states.clone();
        union.union_with(&r.waiting_states);
        prop_assert_eq!(union.count_ones(..), p.num_states());
        prop_assert!(r.action_states.is_disjoint(&r.waiting_states));
        let n = classify(&normalize_tau(&p));
        prop_assert_eq!((n.wait_only, n.action_states, n.waiting_states), (r.wait_only, r.action_states, r.waiting_states));
    }
}
