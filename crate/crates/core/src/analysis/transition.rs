//! Per-round transition matrices `M(t)` over the non-faulty agents,
//! rebuilt from a trimmed-consensus trace, and their structural checks.

use serde::Serialize;

use super::AnalysisError;
use crate::consensus::{Scenario, Trace};
use crate::graph::{AgentSet, DiGraph, FaultySet, ReducedGraph, Topology};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Maps agent ids to rows of `M(t)` and back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Indexing {
    pub agents: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl Indexing {
    pub fn new(n: usize, nonfaulty: AgentSet) -> Self {
        let agents = nonfaulty.to_vec();
        let mut slot = vec![None; n];
        for (k, &a) in agents.iter().enumerate() {
            slot[a] = Some(k);
        }
        Indexing { agents, slot }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn slot(&self, agent: usize) -> Option<usize> {
        self.slot[agent]
    }

    /// Non-faulty entries of a full-length vector.
    pub fn restrict<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.agents.iter().map(|&a| full[a]).collect()
    }
}

/// `M(t)`, built from round `t + 1` of the trace, so that
/// `x(t + 1) = M(t) x(t) − α(t) d(t)` on non-faulty agents.
///
/// Own value and kept non-faulty values get weight `a_i`. A kept faulty
/// value `w` goes wholly to the lowest-id kept non-faulty sender with the
/// same value if there is one, and is otherwise split between the largest
/// trimmed-low and the smallest trimmed-high non-faulty values so that the
/// convex combination reproduces `w` exactly.
pub fn build_m<T: Scalar>(s: &Scenario<T>, trace: &Trace<T>, t: usize) -> Result<Matrix<T>, AnalysisError> {
    let round = t + 1;
    if round > trace.rounds() {
        return Err(AnalysisError::RoundOutOfRange { t, rounds: trace.rounds() });
    }
    let idx = Indexing::new(trace.n, trace.nonfaulty());
    let mut m = Matrix::zeros(idx.len(), idx.len());
    for (row, &i) in idx.agents.iter().enumerate() {
        let trim = trace.trims[round - 1][i].as_ref().ok_or(AnalysisError::MissingTrim { round, agent: i })?;
        let received = trace.received(round, i, s.default_value);
        let value_of = |j: usize| received.iter().find(|(from, _)| *from == j).map(|p| p.1).expect("sender in received");
        let a = T::one() / T::from_usize_lossy(trim.kept.len() + 1);
        m[(row, row)] = a;
        for &j in trim.kept.iter().filter(|&&j| !trace.faulty.contains(j)) {
            let col = idx.slot(j).expect("non-faulty");
            m[(row, col)] = m[(row, col)] + a;
        }
        for &p in trim.kept.iter().filter(|&&j| trace.faulty.contains(j)) {
            let w = value_of(p);
            let same = trim.kept.iter().copied().filter(|&j| !trace.faulty.contains(j)).find(|&j| value_of(j) == w);
            if let Some(j) = same {
                let col = idx.slot(j).expect("non-faulty");
                m[(row, col)] = m[(row, col)] + a;
                continue;
            }
            let pick = |ids: &[usize], better: &dyn Fn(T, T) -> bool| {
                ids.iter()
                    .copied()
                    .filter(|&j| !trace.faulty.contains(j))
                    .map(|j| (j, value_of(j)))
                    .reduce(|best, cur| if better(cur.1, best.1) { cur } else { best })
            };
            let lo = pick(&trim.trimmed_low, &|a, b| a > b);
            let hi = pick(&trim.trimmed_high, &|a, b| a < b);
            let (Some((jl, wl)), Some((jh, wh))) = (lo, hi) else {
                return Err(AnalysisError::NoBracket { round, agent: i, faulty: p });
            };
            let (cl, ch) = (idx.slot(jl).expect("non-faulty"), idx.slot(jh).expect("non-faulty"));
            if wh == wl {
                let col = if jl < jh { cl } else { ch };
                m[(row, col)] = m[(row, col)] + a;
            } else {
                let lambda = (wh - w) / (wh - wl);
                m[(row, cl)] = m[(row, cl)] + a * lambda;
                m[(row, ch)] = m[(row, ch)] + a * (T::one() - lambda);
            }
        }
    }
    Ok(m)
}

/// `‖x(t+1) − (M(t) x(t) − α(t) d(t))‖∞` over non-faulty agents.
pub fn reconstruction_residual<T: Scalar>(
    s: &Scenario<T>,
    trace: &Trace<T>,
    t: usize,
    m: &Matrix<T>,
) -> Result<T, AnalysisError> {
    let idx = Indexing::new(trace.n, trace.nonfaulty());
    let x = idx.restrict(&trace.states[t]);
    let next = idx.restrict(&trace.states[t + 1]);
    let d = idx.restrict(&s.local_subgradients(&trace.states[t])?);
    let alpha = s.schedule.alpha(t);
    let mx = m.mul_vec(&x);
    Ok((0..idx.len())
        .map(|k| (next[k] - (mx[k] - alpha * d[k])).abs())
        .fold(T::zero(), T::max))
}

/// Smallest positive entry over all matrices.
pub fn empirical_beta<T: Scalar>(ms: &[Matrix<T>]) -> T {
    ms.iter()
        .flat_map(|m| (0..m.rows()).flat_map(move |i| (0..m.cols()).map(move |j| m[(i, j)])))
        .filter(|&v| v > T::zero())
        .fold(T::infinity(), T::min)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PropertyReport {
    /// rows nonnegative and summing to one (tolerance 1e-12)
    pub stochastic: bool,
    /// `M_ii = a_i`
    pub diagonal: bool,
    /// nonzeros only on the diagonal and on incoming edges
    pub support: bool,
    /// each row has at least `|N_i^- ∩ (V − F)| − f + 1` entries `≥ β`
    pub lower_bound: bool,
    pub failures: Vec<String>,
}

impl PropertyReport {
    pub fn all(&self) -> bool {
        self.stochastic && self.diagonal && self.support && self.lower_bound
    }
}

/// Checks the four structural properties of one `M(t)`.
pub fn check_properties<T: Scalar>(
    m: &Matrix<T>,
    a: &[T],
    graph: &DiGraph,
    faulty: &FaultySet,
    beta: T,
) -> PropertyReport {
    let idx = Indexing::new(graph.n(), AgentSet::full(graph.n()).difference(faulty.members));
    let mut rep = PropertyReport { stochastic: true, diagonal: true, support: true, lower_bound: true, failures: vec![] };
    let tol = T::lit(1e-12);
    for (r, &i) in idx.agents.iter().enumerate() {
        let row = m.row(r);
        let sum: T = row.iter().copied().sum();
        if row.iter().any(|&v| v < T::zero()) || (sum - T::one()).abs() > tol {
            rep.stochastic = false;
            rep.failures.push(format!("row of agent {i} is not stochastic (sum {sum})"));
        }
        if row[r] != a[r] {
            rep.diagonal = false;
            rep.failures.push(format!("agent {i}: M_ii = {} but a_i = {}", row[r], a[r]));
        }
        let ins = graph.in_set(i);
        for (c, &j) in idx.agents.iter().enumerate() {
            if c != r && row[c] != T::zero() && !ins.contains(j) {
                rep.support = false;
                rep.failures.push(format!("agent {i}: weight on non-neighbor {j}"));
            }
        }
        let required = (ins.difference(faulty.members).len() + 1).saturating_sub(faulty.bound);
        let count = row.iter().filter(|&&v| v >= beta).count();
        if count < required {
            rep.lower_bound = false;
            rep.failures.push(format!("agent {i}: {count} entries >= beta, need {required}"));
        }
    }
    rep
}

/// A reduced graph `H` with `M ≥ β (H + I)` entrywise, if one exists.
///
/// Such `H` exists iff every diagonal entry is at least `β` and every agent
/// has at most `f` non-faulty in-neighbors `j` with `M_ij < β`; the graph
/// that drops exactly those edges is returned (it is the largest witness,
/// and any witness is a subgraph of it).
pub fn find_reduced_witness<T: Scalar>(
    m: &Matrix<T>,
    beta: T,
    graph: &DiGraph,
    faulty: &FaultySet,
) -> Option<ReducedGraph> {
    let alive = AgentSet::full(graph.n()).difference(faulty.members);
    let idx = Indexing::new(graph.n(), alive);
    let mut removed = vec![AgentSet::EMPTY; graph.n()];
    for (r, &i) in idx.agents.iter().enumerate() {
        if m[(r, r)] < beta {
            return None;
        }
        for j in graph.in_set(i).intersection(alive).iter() {
            if m[(r, idx.slot(j).expect("alive"))] < beta {
                removed[i].insert(j);
            }
        }
    }
    ReducedGraph::new(graph, faulty, removed).ok()
}

/// All transition matrices of a trace plus per-round diagnostics.
#[derive(Clone, Debug)]
pub struct TransitionRecord<T> {
    pub indexing: Indexing,
    /// `matrices[t] = M(t)` for `t` in `0..rounds`.
    pub matrices: Vec<Matrix<T>>,
    pub residuals: Vec<T>,
    pub beta: T,
    pub properties: Vec<PropertyReport>,
    pub witnesses: Vec<Option<ReducedGraph>>,
}

pub fn build_record<T: Scalar>(s: &Scenario<T>, trace: &Trace<T>) -> Result<TransitionRecord<T>, AnalysisError> {
    let idx = Indexing::new(trace.n, trace.nonfaulty());
    let rounds = trace.rounds();
    let mut matrices = Vec::with_capacity(rounds);
    let mut residuals = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let m = build_m(s, trace, t)?;
        residuals.push(reconstruction_residual(s, trace, t, &m)?);
        matrices.push(m);
    }
    let beta = empirical_beta(&matrices);
    let properties = (0..rounds)
        .map(|t| {
            let a: Vec<T> = idx
                .agents
                .iter()
                .map(|&i| {
                    let kept = trace.trims[t][i].as_ref().map_or(0, |r| r.kept.len());
                    T::one() / T::from_usize_lossy(kept + 1)
                })
                .collect();
            check_properties(&matrices[t], &a, &s.graph, &s.faulty, beta)
        })
        .collect();
    let witnesses = matrices.iter().map(|m| find_reduced_witness(m, beta, &s.graph, &s.faulty)).collect();
    Ok(TransitionRecord { indexing: idx, matrices, residuals, beta, properties, witnesses })
}
