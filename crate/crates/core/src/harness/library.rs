//! Named scenarios, including the counterexample constructions.

use crate::adversary::Adversary;
use crate::assignment::ZeroPattern;
use crate::decoding::DECODE_TOL;
use crate::objective::{FnKind, SubgradientRule};
use crate::schedule::StepSchedule;

use super::config::{Algorithm, AnalysisSpec, AssignmentSpec, GraphSpec, RunConfig};

pub struct LibraryEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub build: fn() -> RunConfig,
}

impl LibraryEntry {
    pub fn config(&self) -> RunConfig {
        (self.build)()
    }
}

fn base(name: &str, description: &str, algorithm: Algorithm, graph: GraphSpec) -> RunConfig {
    RunConfig {
        name: name.to_string(),
        description: description.to_string(),
        algorithm,
        graph,
        faulty: vec![],
        f: 0,
        adversary: Adversary::Crash { at_round: 0 },
        assignment: AssignmentSpec::Identity,
        functions: vec![],
        schedule: StepSchedule::Harmonic { a: 1.0 },
        x0: vec![],
        rounds: 100,
        seed: 0,
        default_value: 0.0,
        subgradient_rule: SubgradientRule::Midpoint,
        adversarial_demo: false,
        broadcast_capable: true,
        decode_tolerance: DECODE_TOL,
        expected_failure: false,
        analysis: AnalysisSpec::default(),
        output_dir: None,
    }
}

fn smooth(c: f64, eps: f64) -> FnKind<f64> {
    FnKind::SmoothAbs { c, eps }
}

fn flat(a: f64, b: f64) -> FnKind<f64> {
    FnKind::FlatBottom { a, b, sl: 1.0, sr: 1.0 }
}

fn all_ones(n: usize) -> AssignmentSpec {
    AssignmentSpec::Rows { rows: vec![vec![1.0; n]], normalize: true }
}

pub fn alg1_repetition_f1() -> RunConfig {
    RunConfig {
        faulty: vec![2],
        f: 1,
        adversary: Adversary::Constant { value: 1e9 },
        assignment: AssignmentSpec::Repetition { copies: 3 },
        functions: vec![smooth(2.0, 1.0)],
        schedule: StepSchedule::Harmonic { a: 0.5 },
        x0: vec![0.0; 3],
        rounds: 500,
        ..base(
            "alg1-repetition-f1",
            "Gradient coding with a 3-fold repetition code and one agent sending 1e9; \
             the trajectory must equal centralized gradient descent.",
            Algorithm::Alg1,
            GraphSpec::Complete { n: 3 },
        )
    }
}

pub fn alg1_repetition_f2() -> RunConfig {
    RunConfig {
        faulty: vec![3, 4],
        f: 2,
        adversary: Adversary::RandomUniform { lo: -1e3, hi: 1e3 },
        assignment: all_ones(5),
        functions: vec![smooth(2.0, 1.0)],
        schedule: StepSchedule::Harmonic { a: 0.5 },
        x0: vec![0.0; 5],
        rounds: 500,
        seed: 11,
        ..base(
            "alg1-repetition-f2",
            "Gradient coding on five agents with one shared function and two random liars.",
            Algorithm::Alg1,
            GraphSpec::Complete { n: 5 },
        )
    }
}

pub fn impossibility_demo() -> RunConfig {
    RunConfig {
        faulty: vec![1],
        f: 1,
        adversary: Adversary::Crash { at_round: 0 },
        assignment: AssignmentSpec::Identity,
        functions: vec![smooth(0.0, 0.1), smooth(1.0, 0.1)],
        x0: vec![0.5, 0.5],
        rounds: 20_000,
        adversarial_demo: true,
        expected_failure: true,
        ..base(
            "impossibility-demo",
            "Two agents, each holding only its own function, one of them crashed: the survivor \
             cannot learn the other function and settles on its own minimizer instead of the \
             optimum of the sum.",
            Algorithm::Alg2,
            GraphSpec::Complete { n: 2 },
        )
    }
}

pub fn alg2_k5_constant_lie() -> RunConfig {
    RunConfig {
        faulty: vec![4],
        f: 1,
        adversary: Adversary::Constant { value: 1e6 },
        assignment: AssignmentSpec::Sparsest { s: 2, pattern: ZeroPattern::Cyclic },
        functions: vec![flat(0.4, 0.9), flat(0.1, 0.6), flat(0.3, 0.6), flat(0.4, 0.8)],
        x0: vec![-1.0, 0.0, 1.5, 2.0, 0.0],
        rounds: 20_000,
        analysis: AnalysisSpec { enabled: true, ..AnalysisSpec::default() },
        ..base(
            "alg2-k5-constant-lie",
            "Trimmed-mean consensus on K5 with one agent always sending 1e6 and four \
             flat-bottomed functions whose minimizers meet in [0.4, 0.6].",
            Algorithm::Alg2,
            GraphSpec::Complete { n: 5 },
        )
    }
}

pub fn condition2_counterexample() -> RunConfig {
    let edges = vec![(0, 1), (1, 0), (2, 3), (3, 2), (0, 2), (2, 0)]
        .into_iter()
        .chain((0..4).flat_map(|i| [(i, 4), (4, i)]))
        .collect();
    RunConfig {
        faulty: vec![4],
        f: 1,
        adversary: Adversary::Mirror,
        assignment: all_ones(5),
        functions: vec![flat(-1.0, 2.0)],
        x0: vec![0.0, 0.0, 1.0, 1.0, 0.5],
        rounds: 1000,
        adversarial_demo: true,
        expected_failure: true,
        ..base(
            "condition2-counterexample",
            "Groups {0,1} and {2,3} joined by a single edge pair, plus a faulty agent 4 \
             linked to everyone. No agent hears more than one honest value from the other \
             group, and trimming discards it (agents 1 and 3 hear too few values to average \
             at all), so a mirroring adversary keeps the groups one unit apart forever.",
            Algorithm::Alg2,
            GraphSpec::Edges { n: 5, edges },
        )
    }
}

pub fn gsize_tight_k5() -> RunConfig {
    RunConfig {
        faulty: vec![0],
        f: 1,
        adversary: Adversary::Split { low: -50.0, high: 50.0 },
        assignment: AssignmentSpec::Sparsest { s: 3, pattern: ZeroPattern::Cyclic },
        functions: vec![flat(0.0, 0.5), flat(0.2, 0.9), flat(-0.3, 0.6), flat(0.1, 0.5), flat(0.2, 1.0)],
        x0: vec![0.0, -2.0, 3.0, 1.0, 0.5],
        rounds: 5000,
        seed: 3,
        ..base(
            "gsize-tight-k5",
            "K5 is the smallest complete graph meeting the size bound s + 2f with s = 3, f = 1.",
            Algorithm::Alg2,
            GraphSpec::Complete { n: 5 },
        )
    }
}

pub fn alg2_safety_random() -> RunConfig {
    RunConfig {
        faulty: vec![4],
        f: 1,
        adversary: Adversary::RandomUniform { lo: -100.0, hi: 100.0 },
        assignment: all_ones(5),
        functions: vec![flat(-10.0, 10.0)],
        x0: vec![-1.0, 0.5, 0.0, 1.0, 3.0],
        rounds: 1000,
        seed: 1,
        ..base(
            "alg2-safety-random",
            "Zero subgradients throughout; non-faulty estimates must stay inside their \
             initial range whatever the random liar sends.",
            Algorithm::Alg2,
            GraphSpec::Complete { n: 5 },
        )
    }
}

pub const LIBRARY: &[LibraryEntry] = &[
    LibraryEntry { name: "alg1-repetition-f1", description: "gradient coding, 3-fold repetition, f = 1", build: alg1_repetition_f1 },
    LibraryEntry { name: "alg1-repetition-f2", description: "gradient coding, 5 agents, f = 2", build: alg1_repetition_f2 },
    LibraryEntry { name: "impossibility-demo", description: "A = I with a crashed agent", build: impossibility_demo },
    LibraryEntry { name: "alg2-k5-constant-lie", description: "trimmed consensus on K5, constant liar", build: alg2_k5_constant_lie },
    LibraryEntry {
        name: "condition2-counterexample",
        description: "L/R partition graph where consensus fails",
        build: condition2_counterexample,
    },
    LibraryEntry { name: "gsize-tight-k5", description: "K_{s+2f} with s = 3, f = 1", build: gsize_tight_k5 },
    LibraryEntry { name: "alg2-safety-random", description: "zero gradients, random liar", build: alg2_safety_random },
];

pub fn find(name: &str) -> Option<&'static LibraryEntry> {
    LIBRARY.iter().find(|e| e.name == name)
}
