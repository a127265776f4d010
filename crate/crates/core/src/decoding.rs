//! Gradient-coding algorithm: every agent broadcasts its local gradient
//! through an ideal Byzantine broadcast, all agents decode the vector of
//! input-function gradients, and everyone takes the same centralized step.

use serde::Serialize;
use thiserror::Error;

use crate::adversary::AdversaryContext;
use crate::assignment::{decoding_capability, AssignmentMatrix, RANK_TOL};
use crate::consensus::{Scenario, ScenarioError, Trace};
use crate::linalg::combinations;
use crate::objective::{ObjectiveError, SubgradientRule};
use crate::scalar::Scalar;

/// Default relative residual threshold for accepting a decode.
pub const DECODE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeResult<T> {
    /// Recovered input-function gradients.
    pub d: Vec<T>,
    /// Coordinates where `y` differs from `dA` by more than the threshold.
    pub error_support: Vec<usize>,
    /// Largest absolute residual on the trusted coordinates.
    pub residual_max: T,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("received vector has length {got}, expected {n}")]
    Length { got: usize, n: usize },
    #[error("no gradient vector agrees with all but {f} coordinates (best residual {best_residual:e})")]
    NoConsistentFit { f: usize, best_residual: f64 },
}

/// Finds `d` such that `y` and `dA` agree on all but at most `f`
/// coordinates.
///
/// Candidate error supports are tried by size, then lexicographically. For
/// each, `d` is the least-squares fit on the remaining coordinates and is
/// accepted when the largest residual there is at most
/// `tol · max(1, ‖y_trusted‖∞)`.
pub fn decode<T: Scalar>(
    y: &[T],
    a: &AssignmentMatrix<T>,
    f: usize,
    tol: T,
) -> Result<DecodeResult<T>, DecodeError> {
    let n = a.n();
    if y.len() != n {
        return Err(DecodeError::Length { got: y.len(), n });
    }
    let at = a.matrix().transpose(); // n × k, so at · d = (dA)^T
    let mut best = T::infinity();
    for size in 0..=f.min(n) {
        for support in combinations(n, size) {
            let keep: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
            let sub_rows: Vec<Vec<T>> = keep.iter().map(|&i| at.row(i).to_vec()).collect();
            let Some(sub) = crate::linalg::Matrix::from_rows(&sub_rows) else { continue };
            let rhs: Vec<T> = keep.iter().map(|&i| y[i]).collect();
            let Some(d) = sub.least_squares(&rhs, T::lit(RANK_TOL)) else { continue };
            let fit = sub.mul_vec(&d);
            let residual = fit.iter().zip(&rhs).map(|(p, q)| (*p - *q).abs()).fold(T::zero(), T::max);
            let scale = rhs.iter().fold(T::one(), |m, v| m.max(v.abs()));
            best = best.min(residual / scale);
            if residual <= tol * scale {
                let full = a.encode(&d);
                let threshold = tol * scale;
                let error_support =
                    (0..n).filter(|&i| (full[i] - y[i]).abs() > threshold).collect();
                return Ok(DecodeResult { d, error_support, residual_max: residual });
            }
        }
    }
    Err(DecodeError::NoConsistentFit { f, best_residual: best.to_f64_lossy() })
}

/// The vector every receiver sees after one ideal broadcast round: honest
/// coordinates as given, faulty coordinates as chosen by the adversary (or
/// `default` when silent). One value per sender, identical for all
/// receivers.
pub fn byz_broadcast_round<T: Scalar>(
    honest: &[T],
    faulty_values: &[(usize, Option<T>)],
    default: T,
) -> Vec<T> {
    let mut y = honest.to_vec();
    for &(i, v) in faulty_values {
        y[i] = v.unwrap_or(default);
    }
    y
}

#[derive(Clone, Debug)]
pub struct DecodingOptions<T> {
    /// The graph is asserted to support Byzantine broadcast.
    pub broadcast_capable: bool,
    pub tolerance: T,
}

impl<T: Scalar> Default for DecodingOptions<T> {
    fn default() -> Self {
        DecodingOptions { broadcast_capable: true, tolerance: T::lit(DECODE_TOL) }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Algorithm1Error {
    #[error(transparent)]
    Invalid(#[from] ScenarioError),
    #[error("scenario is not flagged broadcast-capable")]
    NotBroadcastCapable,
    #[error("all agents must start from a common x0")]
    DifferentInitialStates,
    #[error("every input function must be differentiable (smooth_abs)")]
    NotDifferentiable,
    #[error("assignment matrix cannot correct {f} errors")]
    NotCapable { f: usize },
    #[error("decode failed in round {round}: {source}")]
    Decode { round: usize, source: DecodeError },
    #[error("round {round}: {source}")]
    Objective { round: usize, source: ObjectiveError },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeReport<T> {
    pub round: usize,
    pub support: Vec<usize>,
    pub residual: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodingRun<T> {
    pub trace: Trace<T>,
    pub decodes: Vec<DecodeReport<T>>,
}

/// Runs the gradient-coding algorithm. Round `t ≥ 1` broadcasts gradients
/// at `x(t − 1)` and applies `x(t) = x(t − 1) − α(t − 1) Σ_j h_j'(x(t − 1))`
/// with the decoded gradients.
pub fn run_algorithm1<T: Scalar>(
    s: &Scenario<T>,
    opts: &DecodingOptions<T>,
) -> Result<DecodingRun<T>, Algorithm1Error> {
    s.validate_shape()?;
    if !opts.broadcast_capable {
        return Err(Algorithm1Error::NotBroadcastCapable);
    }
    if s.x0.iter().any(|&x| x != s.x0[0]) {
        return Err(Algorithm1Error::DifferentInitialStates);
    }
    if !s.functions.all_differentiable() {
        return Err(Algorithm1Error::NotDifferentiable);
    }
    let f = s.faulty.bound;
    if !decoding_capability(&s.assignment, f, T::lit(RANK_TOL)) {
        return Err(Algorithm1Error::NotCapable { f });
    }
    let n = s.n();
    let links: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let nonfaulty = s.nonfaulty();
    let first_receiver = nonfaulty.iter().next();
    let mut x = s.x0[0];
    let mut trace = Trace {
        n,
        faulty: s.faulty.members,
        links: links.clone(),
        states: vec![vec![x; n]],
        messages: Vec::with_capacity(s.rounds),
        trims: Vec::with_capacity(s.rounds),
        warnings: Vec::new(),
    };
    let mut decodes = Vec::with_capacity(s.rounds);
    for t in 1..=s.rounds {
        let honest = s
            .local_subgradients(&vec![x; n])
            .map_err(|source| Algorithm1Error::Objective { round: t, source })?;
        let ctx = AdversaryContext { round: t, values: &honest, faulty: s.faulty.members, graph: &s.graph, seed: s.seed };
        // a broadcast carries one value per sender: what the adversary would
        // send the lowest-id non-faulty receiver
        let faulty_values: Vec<(usize, Option<T>)> = s
            .faulty
            .members
            .iter()
            .map(|i| {
                let to = first_receiver.unwrap_or((i + 1) % n);
                (i, s.adversary.message(&ctx, i, to))
            })
            .collect();
        let y = byz_broadcast_round(&honest, &faulty_values, s.default_value);
        let decoded = decode(&y, &s.assignment, f, opts.tolerance)
            .map_err(|source| Algorithm1Error::Decode { round: t, source })?;
        let step: T = decoded.d.iter().copied().sum();
        x = x - s.schedule.alpha(t - 1) * step;
        let sent: Vec<Option<T>> = links
            .iter()
            .map(|&(i, _)| match faulty_values.iter().find(|(p, _)| *p == i) {
                Some(&(_, v)) => v,
                None => Some(y[i]),
            })
            .collect();
        trace.messages.push(sent);
        trace.trims.push(vec![None; n]);
        trace.states.push(vec![x; n]);
        decodes.push(DecodeReport { round: t, support: decoded.error_support, residual: decoded.residual_max });
    }
    Ok(DecodingRun { trace, decodes })
}

/// Plain gradient descent on `Σ_j h_j` from `x0`, the reference trajectory
/// the gradient-coding algorithm must reproduce.
pub fn centralized_descent<T: Scalar>(s: &Scenario<T>, x0: T) -> Result<Vec<T>, ObjectiveError> {
    let mut xs = Vec::with_capacity(s.rounds + 1);
    let mut x = x0;
    xs.push(x);
    for t in 1..=s.rounds {
        let g: T = s.functions.subgrads(x, SubgradientRule::Midpoint)?.into_iter().sum();
        x = x - s.schedule.alpha(t - 1) * g;
        xs.push(x);
    }
    Ok(xs)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_examples() {
        let a = AssignmentMatrix::<f64>::repetition(1, 3).unwrap();
        let r = decode(&[2.0, 7.0, 2.0], &a, 1, 1e-9).unwrap();
        assert_eq!(r.d, vec![2.0]);
        assert_eq!(r.error_support, vec![1]);

        let r = decode(&[3.0, 3.0, 3.0], &a, 1, 1e-9).unwrap();
        assert!(r.error_support.is_empty());

        assert!(matches!(decode(&[2.0, 7.0, 9.0], &a, 1, 1e-9), Err(DecodeError::NoConsistentFit { .. })));
        assert!(matches!(decode(&[2.0], &a, 1, 1e-9), Err(DecodeError::Length { .. })));
    }

    #[test]
    fn broadcast_is_one_vector() {
        let y = byz_broadcast_round(&[1.0, 2.0, 3.0], &[(1, Some(1e9))], 0.0);
        assert_eq!(y, vec![1.0, 1e9, 3.0]);
        let y = byz_broadcast_round(&[1.0, 2.0, 3.0], &[(0, None), (2, Some(-4.0))], 0.5);
        assert_eq!(y, vec![0.5, 2.0, -4.0]);
    }
}
