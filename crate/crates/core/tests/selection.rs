mod common;

use common::{random_ball_instance, BallInstance};
use lipselect::par::{self, Mode};
use lipselect::report::to_json_string;
use lipselect::selection::verify_sequence;
use lipselect::{run_iteration, IterationConfig, SelectionSequence};
use proptest::prelude::*;

fn run(inst: &BallInstance, rounds: usize) -> SelectionSequence {
    let cfg = IterationConfig::new(inst.alpha, inst.beta, rounds);
    run_iteration(&inst.phi, inst.f0.clone(), &cfg).unwrap()
}

#[test]
fn anchors_keep_their_value_in_later_rounds() {
    let inst = random_ball_instance(3, 400);
    let seq = run(&inst, 5);
    for n in 1..=5 {
        for b in seq.hierarchy.members(n) {
            let frozen = seq.selection(n).get(*b);
            for m in n..=5 {
                assert_eq!(seq.selection(m).get(*b), frozen, "anchor {b} moved in round {m}");
            }
        }
    }
}

#[test]
fn recorded_changes_are_the_observed_ones() {
    let inst = random_ball_instance(4, 300);
    let seq = run(&inst, 4);
    for record in &seq.rounds {
        let observed = seq
            .selection(record.n)
            .sup_distance(seq.selection(record.n - 1))
            .0;
        assert_eq!(record.sup_change, observed);
        assert!(record.sup_change <= lipselect::metric::dyadic(record.n) * seq.epsilon + 1e-9);
    }
    let total = seq.selection(4).sup_distance(seq.selection(0)).0;
    let sum: f64 = seq.rounds.iter().map(|r| r.sup_change).sum();
    assert!(total <= sum + 1e-12);
    assert!(sum <= seq.epsilon);
}

#[test]
fn sequence_json_round_trips_exactly() {
    let inst = random_ball_instance(5, 200);
    let seq = run(&inst, 3);
    let text = to_json_string(&seq).unwrap();
    let back: SelectionSequence = serde_json::from_str(&text).unwrap();
    assert_eq!(to_json_string(&back).unwrap(), text);
    for n in 0..=3 {
        assert_eq!(back.selection(n).values(), seq.selection(n).values());
    }
    let reports = verify_sequence(&inst.phi, &back).unwrap();
    assert!(reports.iter().all(|r| r.passed()));
}

#[test]
fn sequential_and_parallel_runs_agree_bit_for_bit() {
    let inst = random_ball_instance(6, 600);
    let par_text = par::with_mode(Mode::Parallel, || to_json_string(&run(&inst, 4)).unwrap());
    let seq_text = par::with_mode(Mode::Sequential, || to_json_string(&run(&inst, 4)).unwrap());
    assert_eq!(par_text, seq_text);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_round_of_a_random_instance_verifies(seed in any::<u64>(), rounds in 1usize..5) {
        let inst = random_ball_instance(seed, 250);
        let seq = run(&inst, rounds);
        let reports = verify_sequence(&inst.phi, &seq).unwrap();
        for r in &reports {
            prop_assert!(r.passed(), "round {} failed: {:?}", r.n, r);
        }
    }
}
