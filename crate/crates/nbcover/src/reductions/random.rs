use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::protocol::{Label, Protocol, ProtocolBuilder, Transition};

/// Shape of a random wait-only protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomParams {
    pub n_states: usize,
    pub n_messages: usize,
    /// Probability of each optional transition beyond the spine.
    pub density: f64,
    /// Use sends only (no broadcasts).
    pub rdv_only: bool,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            n_states: 5,
            n_messages: 3,
            density: 0.08,
            rdv_only: false,
        }
    }
}

/// A seeded wait-only protocol over states `q0 … q{n-1}` (`q0` initial) and
/// messages drawn from `m0 … m{k-1}`. States are split into action and waiting states up
/// front; a spine gives every state an incoming transition from a lower-numbered
/// state, and each other partition-respecting transition is added with
/// probability `density`. Without messages, transitions are internal.
pub fn random_protocol(params: RandomParams, seed: u64) -> Protocol {
    let n = params.n_states.max(1);
    let k = params.n_messages;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waiting: Vec<bool> = (0..n).map(|q| q > 0 && rng.gen_bool(0.5)).collect();

    let mut b = ProtocolBuilder::new(format!("random_{seed}"), "q0");
    for q in 1..n {
        b.state(&format!("q{q}"));
    }
    for m in 0..k {
        b.message(&format!("m{m}"));
    }
    let action_label = |rng: &mut ChaCha8Rng| -> Label {
        if k == 0 {
            return Label::Internal;
        }
        let m = rng.gen_range(0..k);
        if params.rdv_only || rng.gen_bool(0.5) {
            Label::Send(m)
        } else {
            Label::Broadcast(m)
        }
    };
    let spine = |b: &mut ProtocolBuilder, rng: &mut ChaCha8Rng, src: usize, dst: usize| {
        let label = if waiting[src] && k > 0 {
            Label::Receive(rng.gen_range(0..k))
        } else {
            action_label(rng)
        };
        b.push(Transition {
            source: src,
            label,
            destination: dst,
        });
    };
    for q in 1..n {
        let src = rng.gen_range(0..q);
        spine(&mut b, &mut rng, src, q);
    }
    if n == 1 {
        spine(&mut b, &mut rng, 0, 0);
    }
    let mut kinds: Vec<fn(usize) -> Label> = vec![Label::Send];
    if !params.rdv_only {
        kinds.push(Label::Broadcast);
    }
    for src in 0..n {
        for dst in 0..n {
            if k == 0 {
                if !waiting[src] && rng.gen_bool(params.density) {
                    b.push(Transition {
                        source: src,
                        label: Label::Internal,
                        destination: dst,
                    });
                }
                continue;
            }
            for m in 0..k {
                let labels: Vec<Label> = if waiting[src] {
                    vec![Label::Receive(m)]
                } else {
                    kinds.iter().map(|f| f(m)).collect()
                };
                for label in labels {
                    if rng.gen_bool(params.density) {
                        b.push(Transition {
                            source: src,
                            label,
                            destination: dst,
                        });
                    }
                }
            }
        }
    }
    // Round-trip through the text form so unused messages are dropped and
    // numbering follows first appearance.
    let p = b.finish().expect("random protocols have a spine");
    crate::parse_protocol(&p.render()).expect("rendered protocols parse")
}
