use std::time::Instant;

use byzopt::adversary::Adversary;
use byzopt::assignment::{decoding_capability, AssignmentMatrix, RANK_TOL};
use byzopt::consensus::Scenario;
use byzopt::decoding::{centralized_descent, decode, run_algorithm1, DecodeError, DecodingOptions, DECODE_TOL};
use byzopt::graph::{AgentSet, DiGraph, FaultySet};
use byzopt::objective::{FnCollection, ScalarConvexFn, SubgradientRule};
use byzopt::schedule::StepSchedule;
use proptest::prelude::*;

/// Recovery counts as exact within this relative gap; least squares on the
/// two-row codes is not bit-exact.
const RECOVERY_TOL: f64 = 1e-9;

fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize <= max).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

/// Columns `(a_i, 1 − a_i)` with evenly spaced distinct `a_i`.
fn two_row_code(n: usize) -> AssignmentMatrix<f64> {
    let a: Vec<f64> = (0..n).map(|i| (i + 1) as f64 / (n + 1) as f64).collect();
    AssignmentMatrix::new(&[a.clone(), a.iter().map(|x| 1.0 - x).collect()]).unwrap()
}

/// (matrix, f) pairs the exhaustive check covers.
fn matrix_set() -> Vec<(String, AssignmentMatrix<f64>, usize)> {
    let mut out = Vec::new();
    for n in 3..=7 {
        for f in 1..=2 {
            if n > 2 * f {
                out.push((format!("rep n={n}"), AssignmentMatrix::repetition(1, n).unwrap(), f));
            }
            if n >= 2 * f + 2 {
                out.push((format!("two-row n={n}"), two_row_code(n), f));
            }
        }
    }
    out
}

fn close(got: &[f64], want: &[f64]) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= RECOVERY_TOL * w.abs().max(1.0))
}

#[test]
fn decoder_recovers_every_error_pattern_up_to_f() {
    let start = Instant::now();
    let mut cases = 0;
    for (name, a, f) in matrix_set() {
        assert!(decoding_capability(&a, f, RANK_TOL), "{name} should correct {f}");
        let n = a.n();
        let d: Vec<f64> = [0.75, -2.5][..a.k()].to_vec();
        let clean = a.encode(&d);
        for support in subsets(n, f) {
            // each corrupted coordinate independently takes every magnitude
            let choices = [1.0, -1.0, 1e6, -1e6];
            for pick in 0..choices.len().pow(support.len() as u32) {
                let mut y = clean.clone();
                let mut code = pick;
                for &i in &support {
                    y[i] += choices[code % choices.len()];
                    code /= choices.len();
                }
                let r = decode(&y, &a, f, DECODE_TOL).unwrap_or_else(|e| panic!("{name} {support:?}: {e}"));
                assert!(close(&r.d, &d), "{name} {support:?}: got {:?}", r.d);
                assert_eq!(r.error_support, support, "{name}");
                cases += 1;
            }
        }
    }
    assert!(cases > 1000);
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn repetition_code_rejects_f_plus_one_errors() {
    for n in 3..=7 {
        for f in 1..=2 {
            if n < 2 * f + 1 {
                continue;
            }
            let a = AssignmentMatrix::<f64>::repetition(1, n).unwrap();
            for support in subsets(n, f + 1).into_iter().filter(|s| s.len() == f + 1) {
                let mut y = vec![3.0; n];
                // pairwise distinct, so no n − f coordinates can agree
                for (rank, &i) in support.iter().enumerate() {
                    y[i] += (rank + 1) as f64;
                }
                assert!(
                    matches!(decode(&y, &a, f, DECODE_TOL), Err(DecodeError::NoConsistentFit { .. })),
                    "n={n} f={f} {support:?}"
                );
            }
        }
    }
}

fn all_ones_scenario(adversary: Adversary<f64>) -> Scenario<f64> {
    Scenario {
        graph: DiGraph::complete(5).unwrap(),
        faulty: FaultySet::new(AgentSet::from_bits(0b11000), 2, 5).unwrap(),
        adversary,
        assignment: AssignmentMatrix::normalized(&[vec![1.0; 5]]).unwrap(),
        functions: FnCollection::new(vec![ScalarConvexFn::smooth_abs(2.0, 1.0).unwrap()]).unwrap(),
        schedule: StepSchedule::harmonic(0.5).unwrap(),
        x0: vec![-3.0; 5],
        rounds: 500,
        default_value: 0.0,
        seed: 5,
        subgradient_rule: SubgradientRule::Midpoint,
        adversarial_demo: false,
    }
}

#[test]
fn gradient_coding_matches_centralized_descent_under_any_adversary() {
    let adversaries = [
        Adversary::Crash { at_round: 0 },
        Adversary::Constant { value: 1e9 },
        Adversary::RandomUniform { lo: -1e3, hi: 1e3 },
        Adversary::Split { low: -7.0, high: 7.0 },
        Adversary::MaxSpread,
        Adversary::Mirror,
    ];
    let start = Instant::now();
    for adv in adversaries {
        let s = all_ones_scenario(adv);
        let run = run_algorithm1(&s, &DecodingOptions::default()).unwrap();
        let oracle = centralized_descent(&s, s.x0[0]).unwrap();
        assert_eq!(run.trace.states.len(), oracle.len());
        for (t, (row, want)) in run.trace.states.iter().zip(&oracle).enumerate() {
            for i in s.nonfaulty().iter() {
                assert!((row[i] - want).abs() <= 1e-12, "{adv:?} round {t}: {} vs {want}", row[i]);
            }
        }
        // the run actually moves toward the minimizer at 2
        assert!((oracle[500] - 2.0).abs() < (oracle[0] - 2.0).abs());
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn gradient_coding_rejects_unusable_setups() {
    use byzopt::decoding::Algorithm1Error;
    let mut s = all_ones_scenario(Adversary::Mirror);
    s.x0[1] = 0.0;
    assert_eq!(run_algorithm1(&s, &DecodingOptions::default()).unwrap_err(), Algorithm1Error::DifferentInitialStates);
    let s = all_ones_scenario(Adversary::Mirror);
    let opts = DecodingOptions { broadcast_capable: false, ..DecodingOptions::default() };
    assert_eq!(run_algorithm1(&s, &opts).unwrap_err(), Algorithm1Error::NotBroadcastCapable);
    let mut s = all_ones_scenario(Adversary::Mirror);
    s.assignment = AssignmentMatrix::identity(5).unwrap();
    s.functions = FnCollection::new((0..5).map(|c| ScalarConvexFn::smooth_abs(c as f64, 1.0).unwrap()).collect()).unwrap();
    assert_eq!(run_algorithm1(&s, &DecodingOptions::default()).unwrap_err(), Algorithm1Error::NotCapable { f: 2 });
}

proptest! {
    #[test]
    fn decode_recovers_random_gradients(
        n in 4usize..=7,
        d in prop::collection::vec(-100.0f64..100.0, 2),
        errs in prop::collection::vec((0usize..7, -1e4f64..1e4), 0..=1),
    ) {
        let a = two_row_code(n);
        let mut y = a.encode(&d);
        for &(i, e) in &errs {
            y[i % n] += e;
        }
        let r = decode(&y, &a, 1, DECODE_TOL).unwrap();
        prop_assert!(close(&r.d, &d), "{:?} vs {:?}", r.d, d);
    }
}
