use byzopt::adversary::Adversary;
use byzopt::analysis::{analyze, build_record, AnalysisError, AnalysisOptions, Verdict};
use byzopt::assignment::{construct_sparsest, ZeroPattern};
use byzopt::consensus::{run_scenario, Scenario};
use byzopt::graph::{enumerate_reduced_graphs, AgentSet, DiGraph, FaultySet};
use byzopt::objective::{FnCollection, ScalarConvexFn, SubgradientRule};
use byzopt::schedule::StepSchedule;

fn k5_scenario(rounds: usize, adversary: Adversary<f64>) -> Scenario<f64> {
    let fns = [(0.4, 0.9), (0.1, 0.6), (0.3, 0.6), (0.4, 0.8)]
        .iter()
        .map(|&(a, b)| ScalarConvexFn::flat_bottom(a, b, 1.0, 1.0).unwrap())
        .collect();
    Scenario {
        graph: DiGraph::complete(5).unwrap(),
        faulty: FaultySet::new(AgentSet::singleton(4), 1, 5).unwrap(),
        adversary,
        assignment: construct_sparsest(4, 5, 2, ZeroPattern::Cyclic).unwrap(),
        functions: FnCollection::new(fns).unwrap(),
        schedule: StepSchedule::harmonic(1.0).unwrap(),
        x0: vec![-1.0, 0.0, 1.5, 2.0, 0.0],
        rounds,
        default_value: 0.0,
        seed: 7,
        subgradient_rule: SubgradientRule::Midpoint,
        adversarial_demo: false,
    }
}

#[test]
fn k5_constant_liar_passes_every_check() {
    let s = k5_scenario(1100, Adversary::Constant { value: 1e6 });
    let trace = run_scenario(&s).unwrap();
    let rep = analyze(&s, &trace, &AnalysisOptions::default()).unwrap();
    for (name, v) in rep.verdicts() {
        assert_eq!(v, Verdict::Pass, "{name}");
    }
    assert_eq!(rep.mixing.tau, 256);
    assert_eq!(rep.mixing.nu, 1024);
    assert!(rep.lemma_lb.reports.iter().all(|r| r.columns.len() >= 2));
}

#[test]
fn transition_matrices_reproduce_every_round() {
    let s = k5_scenario(20_000, Adversary::Constant { value: 1e6 });
    let trace = run_scenario(&s).unwrap();
    let rec = build_record(&s, &trace).unwrap();
    let agents = &rec.indexing.agents;
    assert_eq!(agents, &vec![0, 1, 2, 3]);
    assert_eq!(rec.matrices.len(), 20_000);
    let mut worst = 0.0f64;
    for (t, m) in rec.matrices.iter().enumerate() {
        let x: Vec<f64> = agents.iter().map(|&i| trace.states[t][i]).collect();
        let grads = s.local_subgradients(&trace.states[t]).unwrap();
        let alpha = s.schedule.alpha(t);
        for (row, &i) in agents.iter().enumerate() {
            let entries = m.row(row);
            assert!(entries.iter().all(|&v| v >= 0.0), "M({t}) row {row}");
            assert!((entries.iter().sum::<f64>() - 1.0).abs() < 1e-12, "M({t}) row {row}");
            let predicted: f64 = entries.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - alpha * grads[i];
            worst = worst.max((trace.states[t + 1][i] - predicted).abs());
        }
    }
    assert!(worst < 1e-10, "worst residual {worst}");
    let rep = analyze(&s, &trace, &AnalysisOptions::default()).unwrap();
    assert_eq!(rep.reconstruction.verdict, Verdict::Pass);
    assert_eq!(rep.properties.verdict, Verdict::Pass, "{:?}", rep.properties.failures);
    assert_eq!(rep.witnesses.found, 20_000);
    assert!((rep.mixing.beta - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn mixing_constants_match_a_direct_count() {
    let s = k5_scenario(1100, Adversary::Split { low: -5.0, high: 5.0 });
    let fs = &s.faulty;
    let tau = enumerate_reduced_graphs(&s.graph, fs).len() as u128;
    let trace = run_scenario(&s).unwrap();
    let rep = analyze(&s, &trace, &AnalysisOptions::default()).unwrap();
    assert_eq!(rep.mixing.tau, tau);
    assert_eq!(rep.mixing.nu, tau * 4);
    assert_eq!(rep.required_columns, 2);
    assert_eq!(rep.lemma_lb.verdict, Verdict::Pass);
    assert_eq!(rep.lemma_lb.reports.len(), 30);
    assert!(rep.rate.min_margin >= -1e-9);
    assert_eq!(rep.rate.checked_pairs, 30 * 31 / 2);
    assert_eq!(rep.pi_lower.verdict, Verdict::Pass);
}

#[test]
fn short_traces_are_inconclusive_rather_than_failing() {
    let s = k5_scenario(400, Adversary::Constant { value: 1e6 });
    let trace = run_scenario(&s).unwrap();
    let rep = analyze(&s, &trace, &AnalysisOptions::default()).unwrap();
    assert_eq!(rep.lemma_lb.verdict, Verdict::Inconclusive);
    assert!(!rep.any_fail());
}

/// `(n − φ) max|x0| γ^⌈t/ν⌉ + (n − φ) L Σ_{r<t} α(r−1) γ^⌈(t−r)/ν⌉ + 2 α(t−1) L`
/// with γ = 1, which is what it is in f64 once β^ν underflows.
fn uub_with_unit_gamma(t: usize) -> f64 {
    let (m, x_max, lip) = (4.0, 2.0, 1.0);
    let alpha = |r: usize| 1.0 / (r + 1) as f64;
    m * x_max + m * lip * (1..t).map(|r| alpha(r - 1)).sum::<f64>() + 2.0 * alpha(t - 1) * lip
}

#[test]
fn uniform_bound_holds_but_does_not_decay() {
    let s = k5_scenario(20_000, Adversary::Constant { value: 1e6 });
    let trace = run_scenario(&s).unwrap();
    let rep = analyze(&s, &trace, &AnalysisOptions::default()).unwrap();
    assert_eq!(rep.uub.verdict, Verdict::Pass);
    assert_eq!(rep.uub.reports.len(), 200);
    assert!(rep.uub.reports.iter().all(|r| r.deviation <= r.bound));
    for r in &rep.uub.reports {
        assert!((r.bound - uub_with_unit_gamma(r.t)).abs() < 1e-9, "t = {}", r.t);
    }
    // with ν = 1024 every t ≤ 200 sits in the first block, so the bound
    // only accumulates step sizes
    assert!((rep.uub.bound_at_decay_from - 22.29).abs() < 0.01);
    assert!((rep.uub.bound_at_t_max - 31.50).abs() < 0.01);
    assert!(!rep.uub.decays);
    assert_eq!(rep.y_sequence.verdict, Verdict::Pass);
    assert_eq!(rep.basic_iter.verdict, Verdict::Pass);
    assert_eq!(rep.consensus.verdict, Verdict::Pass);
}

#[test]
fn oversized_scenarios_are_refused() {
    let mut s = k5_scenario(10, Adversary::Mirror);
    s.graph = DiGraph::complete(7).unwrap();
    s.faulty = FaultySet::new(AgentSet::singleton(6), 1, 7).unwrap();
    s.assignment = construct_sparsest(4, 7, 2, ZeroPattern::Cyclic).unwrap();
    s.x0 = vec![0.0; 7];
    let trace = run_scenario(&s).unwrap();
    assert!(matches!(analyze(&s, &trace, &AnalysisOptions::default()), Err(AnalysisError::TooLarge { n: 7, f: 1 })));
}
