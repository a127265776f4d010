//! The consensus value `y(t)` and the inequalities relating it to the
//! agents' estimates.

use serde::Serialize;

use super::products::{Mixing, PiEstimate};
use crate::objective::LocalObjective;
use crate::scalar::Scalar;

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct YSequence<T> {
    /// `y(0..=t_max)` by the direct sum.
    pub y: Vec<T>,
    /// Largest gap between the direct sum and the recurrence
    /// `y(t+1) = y(t) − α(t)⟨π(t+1), d(t)⟩`.
    pub recurrence_gap: T,
    /// Every `π(r)` used had converged.
    pub conclusive: bool,
}

/// `y(t) = ⟨π(0), x(0)⟩ − Σ_{r=1..t} α(r−1) ⟨π(r), d(r−1)⟩` for
/// `t ≤ t_max`. Needs `pis[r]` for `r ≤ t_max`, `d[r]` and `alpha[r]` for
/// `r < t_max`.
pub fn y_sequence<T: Scalar>(
    pis: &[PiEstimate<T>],
    x0: &[T],
    d: &[Vec<T>],
    alpha: &[T],
    t_max: usize,
) -> YSequence<T> {
    let base = dot(&pis[0].pi, x0);
    let term = |r: usize| alpha[r - 1] * dot(&pis[r].pi, &d[r - 1]);
    let y: Vec<T> = (0..=t_max).map(|t| (1..=t).fold(base, |acc, r| acc - term(r))).collect();
    let mut rec = base;
    let mut gap = T::zero();
    for t in 0..t_max {
        rec = rec - alpha[t] * dot(&pis[t + 1].pi, &d[t]);
        gap = gap.max((rec - y[t + 1]).abs());
    }
    let conclusive = pis[..=t_max].iter().all(|p| p.converged);
    YSequence { y, recurrence_gap: gap, conclusive }
}

/// Right-hand side of the uniform bound on `|y(t) − x_i(t)|`, `t ≥ 1`:
/// `(n−φ) max{|u|,|U|} γ^⌈t/ν⌉ + (n−φ) L Σ_{r=1}^{t−1} α(r−1) γ^⌈(t−r)/ν⌉
/// + 2 α(t−1) L`.
pub fn uub_bound(mix: &Mixing, nonfaulty: usize, init_abs_max: f64, lipschitz: f64, alpha: &[f64], t: usize) -> f64 {
    let m = nonfaulty as f64;
    let first = m * init_abs_max * mix.gamma_pow(mix.blocks(t));
    let middle: f64 = (1..t).map(|r| alpha[r - 1] * mix.gamma_pow(mix.blocks(t - r))).sum();
    first + m * lipschitz * middle + 2.0 * alpha[t - 1] * lipschitz
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UubReport {
    pub t: usize,
    /// `max_i |y(t) − x_i(t)|`
    pub deviation: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

pub fn check_uub<T: Scalar>(y_t: T, x_t: &[T], t: usize, bound: f64) -> UubReport {
    let deviation = x_t.iter().map(|&x| (y_t - x).abs().to_f64_lossy()).fold(0.0, f64::max);
    let pass = deviation <= bound + 1e-12 * bound.abs().max(1.0);
    UubReport { t, deviation, bound, margin: bound - deviation, pass }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasicIterReport {
    pub t: usize,
    /// `|y(t+1) − x|²`
    pub lhs: f64,
    /// Right-hand side of the basic-iteration inequality.
    pub rhs: f64,
    /// The sharper intermediate bound from its derivation, using
    /// `|d_j| + |δ_j|` and `Σ d_j²` in place of `2L` and `(n−φ)L²`.
    pub rhs_sharp: f64,
    pub pass: bool,
    /// Robbins–Siegmund terms at this step for reference point `x`:
    /// `b_t = 2α Σ π_j (g_j(y) − g_j(x))`
    pub b: f64,
    /// `c_t = 4Lα Σ π_j |y − x_j| + α²(n−φ)L²`
    pub c: f64,
}

/// Inputs of one basic-iteration check at time `t`.
pub struct BasicIterInput<'a, 'o, T> {
    pub t: usize,
    pub y_t: T,
    pub y_next: T,
    pub pi_next: &'a [T],
    pub x_t: &'a [T],
    pub d_t: &'a [T],
    pub alpha_t: T,
    pub lipschitz: T,
    pub objectives: &'a [LocalObjective<'o, T>],
}

/// Checks
/// `|y(t+1) − x|² ≤ |y(t) − x|² + 4Lα Σ π_j |y(t) − x_j(t)|
///   − 2α Σ π_j (g_j(y(t)) − g_j(x)) + α² (n−φ) L²`
/// together with its sharper intermediate form, using midpoint
/// subgradients `δ_j` of `g_j` at `y(t)`.
pub fn check_basic_iter<T: Scalar>(inp: &BasicIterInput<'_, '_, T>, x: T) -> BasicIterReport {
    let (y, a, l) = (inp.y_t, inp.alpha_t, inp.lipschitz);
    let m = T::from_usize_lossy(inp.x_t.len());
    let two = T::lit(2.0);
    let mut spread_term = T::zero();
    let mut sharp_spread = T::zero();
    let mut gap_term = T::zero();
    let mut d_sq = T::zero();
    for (j, g) in inp.objectives.iter().enumerate() {
        let p = inp.pi_next[j];
        let dev = (y - inp.x_t[j]).abs();
        let delta = g.subgrad(y).expect("finite y");
        spread_term = spread_term + p * dev;
        sharp_spread = sharp_spread + p * (inp.d_t[j].abs() + delta.abs()) * dev;
        gap_term = gap_term + p * (g.eval(y).expect("finite y") - g.eval(x).expect("finite x"));
        d_sq = d_sq + inp.d_t[j] * inp.d_t[j];
    }
    let base = (y - x) * (y - x);
    let b = two * a * gap_term;
    let c = T::lit(4.0) * l * a * spread_term + a * a * m * l * l;
    let rhs = base - b + c;
    let rhs_sharp = base + two * a * sharp_spread - b + a * a * d_sq;
    let lhs = (inp.y_next - x) * (inp.y_next - x);
    let tol = T::lit(1e-9) * T::one().max(lhs.abs()).max(rhs.abs());
    let pass = lhs <= rhs_sharp + tol && rhs_sharp <= rhs + tol;
    BasicIterReport {
        t: inp.t,
        lhs: lhs.to_f64_lossy(),
        rhs: rhs.to_f64_lossy(),
        rhs_sharp: rhs_sharp.to_f64_lossy(),
        pass,
        b: b.to_f64_lossy(),
        c: c.to_f64_lossy(),
    }
}
