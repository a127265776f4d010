//! Synchronous-round engine for trimmed-mean consensus with diminishing
//! subgradient steps, plus the trace it records.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::adversary::{Adversary, AdversaryContext, AdversaryError};
use crate::assignment::{sparsity_by_row_zeros, AssignmentMatrix};
use crate::graph::{check_condition1, AgentSet, DiGraph, FaultySet, GraphError, MAX_CONDITION1_AGENTS};
use crate::objective::{FnCollection, Interval, LocalObjective, ObjectiveError, SubgradientRule};
use crate::scalar::Scalar;
use crate::schedule::StepSchedule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("received value from agent {sender} is not finite")]
    NonFiniteMessage { sender: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("assignment has {got} columns but the graph has {n} agents")]
    AssignmentColumns { got: usize, n: usize },
    #[error("assignment has {got} rows but there are {k} functions")]
    AssignmentRows { got: usize, k: usize },
    #[error("x0 has {got} entries, expected {n}")]
    InitialLength { got: usize, n: usize },
    #[error("x0[{0}] is not finite")]
    InitialNonFinite(usize),
    #[error("default value must be finite")]
    DefaultNonFinite,
    #[error("faulty agent {agent} out of range for n = {n}")]
    FaultyOutOfRange { agent: usize, n: usize },
    #[error("{members} faulty agents exceed f = {f}")]
    TooManyFaulty { members: usize, f: usize },
    #[error("graph fails condition 1 for f = {f}, sp(A) = {s}; set adversarial_demo to run it anyway")]
    ConditionViolated { f: usize, s: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Everything needed to replay one execution.
#[derive(Clone, Debug)]
pub struct Scenario<T> {
    pub graph: DiGraph,
    pub faulty: FaultySet,
    pub adversary: Adversary<T>,
    pub assignment: AssignmentMatrix<T>,
    pub functions: FnCollection<T>,
    pub schedule: StepSchedule<T>,
    pub x0: Vec<T>,
    pub rounds: usize,
    pub default_value: T,
    pub seed: u64,
    pub subgradient_rule: SubgradientRule,
    /// Allow graphs that fail condition 1 (counterexample reproduction).
    pub adversarial_demo: bool,
}

impl<T: Scalar> Scenario<T> {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Structural checks shared by both algorithms.
    pub fn validate_shape(&self) -> Result<(), ScenarioError> {
        let n = self.n();
        if self.assignment.n() != n {
            return Err(ScenarioError::AssignmentColumns { got: self.assignment.n(), n });
        }
        if self.assignment.k() != self.functions.k() {
            return Err(ScenarioError::AssignmentRows { got: self.assignment.k(), k: self.functions.k() });
        }
        if self.x0.len() != n {
            return Err(ScenarioError::InitialLength { got: self.x0.len(), n });
        }
        if let Some(i) = self.x0.iter().position(|x| !x.is_finite()) {
            return Err(ScenarioError::InitialNonFinite(i));
        }
        if !self.default_value.is_finite() {
            return Err(ScenarioError::DefaultNonFinite);
        }
        if let Some(agent) = self.faulty.members.iter().find(|&i| i >= n) {
            return Err(ScenarioError::FaultyOutOfRange { agent, n });
        }
        if self.faulty.len() > self.faulty.bound {
            return Err(ScenarioError::TooManyFaulty { members: self.faulty.len(), f: self.faulty.bound });
        }
        self.adversary.validated()?;
        Ok(())
    }

    /// Full validation for the trimmed-consensus algorithm, including
    /// condition 1 with `s = sp(A)` unless this is an adversarial demo.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.validate_shape()?;
        if self.adversarial_demo {
            return Ok(());
        }
        if self.n() > MAX_CONDITION1_AGENTS {
            log::warn!("condition 1 not checked: n = {} exceeds the enumeration limit", self.n());
            return Ok(());
        }
        let f = self.faulty.bound;
        let s = sparsity_by_row_zeros(&self.assignment).value.min(self.n() + 1);
        if !check_condition1(&self.graph, f, s)?.holds {
            return Err(ScenarioError::ConditionViolated { f, s });
        }
        Ok(())
    }

    pub fn local_objective(&self, i: usize) -> LocalObjective<'_, T> {
        LocalObjective::new(self.assignment.column(i), &self.functions)
            .expect("validated assignment column is a probability vector")
    }

    /// `d_i` at `x` for every agent, with the configured subgradient rule.
    pub fn local_subgradients(&self, x: &[T]) -> Result<Vec<T>, ObjectiveError> {
        (0..self.n())
            .map(|i| self.local_objective(i).subgrad_with(x[i], self.subgradient_rule))
            .collect()
    }

    /// `X = argmin (1/k) Σ h_j`.
    pub fn optimum(&self) -> Interval<T> {
        self.functions.optimum()
    }

    pub fn nonfaulty(&self) -> AgentSet {
        AgentSet::full(self.n()).difference(self.faulty.members)
    }
}

/// How agent `i` split its received values in one round.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TrimRecord {
    /// `N_i^*(t)`, ascending ids.
    pub kept: Vec<usize>,
    pub trimmed_low: Vec<usize>,
    pub trimmed_high: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrimOutcome<T> {
    pub new_x: T,
    pub record: TrimRecord,
    /// Fewer than `2f + 1` values arrived, so nothing was averaged.
    pub degenerate: bool,
}

/// One trimmed-mean step: sort `received` by value (ties by sender id),
/// drop the `f` smallest and `f` largest, average the rest with `x_self`,
/// then step against `d_self`.
pub fn trimmed_update<T: Scalar>(
    x_self: T,
    received: &[(usize, T)],
    f: usize,
    d_self: T,
    alpha: T,
) -> Result<TrimOutcome<T>, ConsensusError> {
    if !(alpha.is_finite() && alpha > T::zero()) {
        return Err(ConsensusError::BadStep(alpha.to_f64_lossy()));
    }
    if let Some(&(sender, _)) = received.iter().find(|(_, v)| !v.is_finite()) {
        return Err(ConsensusError::NonFiniteMessage { sender });
    }
    let mut sorted = received.to_vec();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    let r = sorted.len();
    let ids = |s: &[(usize, T)]| {
        let mut v: Vec<usize> = s.iter().map(|p| p.0).collect();
        v.sort_unstable();
        v
    };
    if r <= 2 * f {
        let low = r.min(f);
        return Ok(TrimOutcome {
            new_x: x_self - alpha * d_self,
            record: TrimRecord { kept: Vec::new(), trimmed_low: ids(&sorted[..low]), trimmed_high: ids(&sorted[low..]) },
            degenerate: true,
        });
    }
    let kept = &sorted[f..r - f];
    let sum = kept.iter().fold(x_self, |acc, p| acc + p.1);
    let new_x = sum / T::from_usize_lossy(kept.len() + 1) - alpha * d_self;
    Ok(TrimOutcome {
        new_x,
        record: TrimRecord { kept: ids(kept), trimmed_low: ids(&sorted[..f]), trimmed_high: ids(&sorted[r - f..]) },
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceWarning {
    pub round: usize,
    pub agent: usize,
    pub message: String,
}

/// Record of one execution.
///
/// Round `t` (1-based) carries values from time `t − 1` and produces the
/// states at time `t`. `messages[t − 1][e]` is what travelled on `links[e]`
/// in round `t` (`None` if nothing was sent).
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T> {
    pub n: usize,
    pub faulty: AgentSet,
    pub links: Vec<(usize, usize)>,
    /// `(rounds + 1) × n`; faulty columns hold display values.
    pub states: Vec<Vec<T>>,
    pub messages: Vec<Vec<Option<T>>>,
    /// Per round, per agent; `None` for faulty agents and for algorithms
    /// without trimming.
    pub trims: Vec<Vec<Option<TrimRecord>>>,
    pub warnings: Vec<TraceWarning>,
}

impl<T: Scalar> Trace<T> {
    pub fn rounds(&self) -> usize {
        self.states.len() - 1
    }

    pub fn nonfaulty(&self) -> AgentSet {
        AgentSet::full(self.n).difference(self.faulty)
    }

    pub fn spread_at(&self, t: usize) -> T {
        spread(&self.states[t], self.nonfaulty())
    }

    pub fn dist_at(&self, t: usize, x: &Interval<T>) -> T {
        dist_to_interval(&self.states[t], self.nonfaulty(), x)
    }

    pub fn diagnostics(&self, x: &Interval<T>) -> Diagnostics<T> {
        let spread: Vec<T> = (0..self.states.len()).map(|t| self.spread_at(t)).collect();
        let dist: Vec<T> = (0..self.states.len()).map(|t| self.dist_at(t, x)).collect();
        let in_x = *dist.last().expect("trace has x0") == T::zero();
        Diagnostics { spread, dist, in_x }
    }

    /// Values received by `agent` in round `t`, with missing messages
    /// replaced by `default`.
    pub fn received(&self, t: usize, agent: usize, default: T) -> Vec<(usize, T)> {
        self.links
            .iter()
            .zip(&self.messages[t - 1])
            .filter(|((_, to), _)| *to == agent)
            .map(|(&(from, _), m)| (from, m.unwrap_or(default)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics<T> {
    pub spread: Vec<T>,
    pub dist: Vec<T>,
    /// Every non-faulty final estimate lies in `X`.
    pub in_x: bool,
}

/// `max |x_i − x_j|` over the given agents.
pub fn spread<T: Scalar>(x: &[T], agents: AgentSet) -> T {
    let (lo, hi) = agents
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), i| (lo.min(x[i]), hi.max(x[i])));
    if agents.is_empty() {
        T::zero()
    } else {
        hi - lo
    }
}

/// Largest distance from an agent's estimate to `interval`.
pub fn dist_to_interval<T: Scalar>(x: &[T], agents: AgentSet, interval: &Interval<T>) -> T {
    agents.iter().map(|i| interval.distance(x[i])).fold(T::zero(), T::max)
}

/// Runs trimmed-mean consensus with subgradient steps for `rounds` rounds.
///
/// Faulty agents keep a shadow state that follows the honest rule on what
/// they receive; strategies that imitate honest behaviour (crash before its
/// round, mirror) read it.
pub fn run_scenario<T: Scalar>(s: &Scenario<T>) -> Result<Trace<T>, RunError> {
    s.validate()?;
    let n = s.n();
    let f = s.faulty.bound;
    let links = s.graph.edges();
    let mut shadow = s.x0.clone();
    let nominal = |cur: &[T]| -> Vec<T> {
        (0..n).map(|i| if s.faulty.contains(i) { s.adversary.nominal_state(cur[i]) } else { cur[i] }).collect()
    };
    let mut trace = Trace {
        n,
        faulty: s.faulty.members,
        links: links.clone(),
        states: vec![nominal(&shadow)],
        messages: Vec::with_capacity(s.rounds),
        trims: Vec::with_capacity(s.rounds),
        warnings: Vec::new(),
    };
    let mut warned = AgentSet::EMPTY;
    for t in 1..=s.rounds {
        let ctx = AdversaryContext { round: t, values: &shadow, faulty: s.faulty.members, graph: &s.graph, seed: s.seed };
        let msgs: Vec<Option<T>> = links
            .iter()
            .map(|&(i, j)| if s.faulty.contains(i) { s.adversary.message(&ctx, i, j) } else { Some(shadow[i]) })
            .collect();
        let alpha = s.schedule.alpha(t - 1);
        let grads = s.local_subgradients(&shadow).map_err(|e| RunError::Round { round: t, source: e.into() })?;
        let mut next = shadow.clone();
        let mut trims = vec![None; n];
        for j in 0..n {
            let received: Vec<(usize, T)> = links
                .iter()
                .zip(&msgs)
                .filter(|((_, to), _)| *to == j)
                .map(|(&(from, _), m)| (from, m.unwrap_or(s.default_value)))
                .collect();
            let out = trimmed_update(shadow[j], &received, f, grads[j], alpha)
                .map_err(|e| RunError::Round { round: t, source: e })?;
            next[j] = out.new_x;
            if s.faulty.contains(j) {
                continue;
            }
            if out.degenerate {
                let message = format!(
                    "agent {j} received {} values, at most 2f = {}; no averaging this round",
                    received.len(),
                    2 * f
                );
                if !warned.contains(j) {
                    log::warn!("round {t}: {message} (further rounds not logged)");
                    warned.insert(j);
                }
                trace.warnings.push(TraceWarning { round: t, agent: j, message });
            }
            trims[j] = Some(out.record);
        }
        shadow = next;
        trace.states.push(nominal(&shadow));
        trace.messages.push(msgs);
        trace.trims.push(trims);
    }
    Ok(trace)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Invalid(#[from] ScenarioError),
    #[error("round {round}: {source}")]
    Round { round: usize, source: ConsensusError },
}
