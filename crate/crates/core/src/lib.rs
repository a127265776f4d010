//! Simulation and verification toolkit for Byzantine fault-tolerant
//! distributed scalar optimization over directed graphs.

pub mod adversary;
pub mod analysis;
pub mod assignment;
pub mod consensus;
pub mod decoding;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod objective;
pub mod scalar;
pub mod schedule;

/// Double-precision instantiations of the generic types.
pub type Scenario = consensus::Scenario<f64>;
pub type Trace = consensus::Trace<f64>;
pub type AssignmentMatrix = assignment::AssignmentMatrix<f64>;
pub type ScalarConvexFn = objective::ScalarConvexFn<f64>;
pub type FnCollection = objective::FnCollection<f64>;
pub type Interval = objective::Interval<f64>;
pub type Adversary = adversary::Adversary<f64>;
pub type StepSchedule = schedule::StepSchedule<f64>;
pub type Matrix = linalg::Matrix<f64>;

pub use graph::{AgentSet, DiGraph, FaultySet};
