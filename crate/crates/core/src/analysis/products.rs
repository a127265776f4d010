//! Backward products `Φ(t, r) = M(t) M(t−1) ⋯ M(r)`, their limits `π(r)`,
//! and the mixing-rate checks stated in terms of `β`, `ν` and `γ`.

use serde::Serialize;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Declared converged when every column of `Φ(horizon, r)` varies by less
/// than this across rows.
pub const PI_CONVERGED: f64 = 1e-9;

/// `Φ(t, r)` for `r ≤ t + 1`; `Φ(t, t + 1) = I`.
pub fn phi_product<T: Scalar>(ms: &[Matrix<T>], t: usize, r: usize) -> Matrix<T> {
    assert!(r <= t + 1, "phi_product needs r <= t + 1");
    let dim = ms.first().map_or(0, Matrix::rows);
    if r > t {
        return Matrix::identity(dim);
    }
    ms[r..=t].iter().fold(Matrix::identity(dim), |p, m| m.matmul(&p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiEstimate<T> {
    pub r: usize,
    pub pi: Vec<T>,
    /// Largest spread of a column of `Φ(horizon, r)` across rows.
    pub diameter: T,
    pub converged: bool,
}

fn estimate_from<T: Scalar>(r: usize, p: &Matrix<T>) -> PiEstimate<T> {
    let rows = T::from_usize_lossy(p.rows().max(1));
    let mut diameter = T::zero();
    let pi = (0..p.cols())
        .map(|j| {
            let col = p.column(j);
            let (lo, hi) = col.iter().fold((T::infinity(), T::neg_infinity()), |(l, h), &v| (l.min(v), h.max(v)));
            diameter = diameter.max(hi - lo);
            col.into_iter().sum::<T>() / rows
        })
        .collect();
    PiEstimate { r, pi, diameter, converged: diameter < T::lit(PI_CONVERGED) }
}

/// `π(r)` as the row average of `Φ(horizon, r)`.
pub fn estimate_pi<T: Scalar>(ms: &[Matrix<T>], r: usize, horizon: usize) -> PiEstimate<T> {
    estimate_from(r, &phi_product(ms, horizon, r))
}

/// `π(r)` for every `r ≤ r_max`, all against the same horizon, by one
/// backward sweep `Φ(h, r) = Φ(h, r + 1) M(r)`.
pub fn estimate_pi_range<T: Scalar>(ms: &[Matrix<T>], horizon: usize, r_max: usize) -> Vec<PiEstimate<T>> {
    let dim = ms.first().map_or(0, Matrix::rows);
    let mut p = Matrix::identity(dim);
    let mut out = Vec::with_capacity(r_max + 1);
    for r in (0..=horizon + 1).rev() {
        if r <= horizon {
            p = p.matmul(&ms[r]);
        }
        if r <= r_max {
            out.push(estimate_from(r, &p));
        }
    }
    out.reverse();
    out
}

/// `β`, `ν = τ (n − φ)` and `γ = 1 − β^ν`, with powers kept in the log
/// domain because `β^ν` underflows for realistic `ν`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mixing {
    pub beta: f64,
    pub tau: u128,
    pub nu: u128,
    /// `ln β^ν`
    pub ln_beta_nu: f64,
    /// `β^ν` (may be 0 after underflow)
    pub beta_nu: f64,
    /// `γ` (may round to 1)
    pub gamma: f64,
}

impl Mixing {
    pub fn new(beta: f64, tau: u128, nonfaulty: usize) -> Self {
        let nu = tau * nonfaulty as u128;
        let ln_beta_nu = nu as f64 * beta.ln();
        let beta_nu = ln_beta_nu.exp();
        Mixing { beta, tau, nu, ln_beta_nu, beta_nu, gamma: 1.0 - beta_nu }
    }

    /// `γ^k`, computed as `exp(k · ln(1 − β^ν))`.
    pub fn gamma_pow(&self, k: u128) -> f64 {
        (k as f64 * (-self.beta_nu).ln_1p()).exp()
    }

    /// `⌈a / ν⌉`
    pub fn blocks(&self, a: usize) -> u128 {
        (a as u128).div_ceil(self.nu.max(1))
    }

    /// Whether `v ≥ β^ν`, compared as logarithms.
    pub fn at_least_beta_nu(&self, v: f64) -> bool {
        v > 0.0 && v.ln() >= self.ln_beta_nu
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaLbReport {
    pub r: usize,
    /// Non-faulty positions whose column of `Φ(r + ν − 1, r)` is `≥ β^ν`.
    pub columns: Vec<usize>,
    pub required: usize,
    pub pass: bool,
    pub insufficient_horizon: bool,
}

/// Counts columns of `Φ(r + ν − 1, r)` bounded below by `β^ν`.
pub fn check_lemma_lb<T: Scalar>(ms: &[Matrix<T>], mix: &Mixing, r: usize, required: usize) -> LemmaLbReport {
    let end = r as u128 + mix.nu - 1;
    if mix.nu == 0 || end >= ms.len() as u128 {
        return LemmaLbReport { r, columns: vec![], required, pass: false, insufficient_horizon: true };
    }
    let p = phi_product(ms, end as usize, r);
    let columns: Vec<usize> = (0..p.cols())
        .filter(|&j| (0..p.rows()).all(|i| mix.at_least_beta_nu(p[(i, j)].to_f64_lossy())))
        .collect();
    let pass = columns.len() >= required;
    LemmaLbReport { r, columns, required, pass, insufficient_horizon: false }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub t: usize,
    pub r: usize,
    pub bound: f64,
    pub deviation: f64,
    /// `bound − deviation`
    pub margin: f64,
    pub pi_diameter: f64,
    pub conclusive: bool,
}

/// Compares `max_ij |Φ_ij(t, r) − π_j(r)|` with `γ^⌈(t − r + 1)/ν⌉`.
pub fn check_rate<T: Scalar>(ms: &[Matrix<T>], mix: &Mixing, t: usize, r: usize, pi: &PiEstimate<T>) -> RateReport {
    let p = phi_product(ms, t, r);
    let deviation = (0..p.rows())
        .flat_map(|i| (0..p.cols()).map(move |j| (i, j)))
        .map(|(i, j)| (p[(i, j)] - pi.pi[j]).abs().to_f64_lossy())
        .fold(0.0, f64::max);
    let bound = mix.gamma_pow(mix.blocks(t + 1 - r));
    RateReport {
        t,
        r,
        bound,
        deviation,
        margin: bound - deviation,
        pi_diameter: pi.diameter.to_f64_lossy(),
        conclusive: pi.converged,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiLowerReport {
    pub r: usize,
    /// Non-faulty positions with `π_i(r) ≥ β^ν − 1e-12`.
    pub indices: Vec<usize>,
    pub required: usize,
    pub pass: bool,
    pub conclusive: bool,
}

pub fn check_pi_lower<T: Scalar>(mix: &Mixing, pi: &PiEstimate<T>, required: usize) -> PiLowerReport {
    let indices: Vec<usize> = pi
        .pi
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.to_f64_lossy() >= mix.beta_nu - 1e-12)
        .map(|(i, _)| i)
        .collect();
    let pass = indices.len() >= required;
    PiLowerReport { r: pi.r, indices, required, pass, conclusive: pi.converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_convention_and_uniform_limit() {
        let u = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let ms = vec![u.clone(), u.clone(), u.clone()];
        assert_eq!(phi_product(&ms, 1, 2), Matrix::identity(2));
        assert_eq!(phi_product(&ms, 2, 0), u);
        let pi = estimate_pi(&ms, 0, 2);
        assert!(pi.converged);
        assert_eq!(pi.pi, vec![0.5, 0.5]);
    }

    #[test]
    fn sweep_matches_direct_products() {
        let a = Matrix::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.25, 0.25, 0.5]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]]).unwrap();
        let ms: Vec<Matrix<f64>> = (0..40).map(|t| if t % 3 == 0 { b.clone() } else { a.clone() }).collect();
        let sweep = estimate_pi_range(&ms, 39, 5);
        for (r, est) in sweep.iter().enumerate() {
            let direct = estimate_pi(&ms, r, 39);
            for j in 0..3 {
                assert!((est.pi[j] - direct.pi[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixing_in_log_domain() {
        let mix = Mixing::new(0.25, 256, 4);
        assert_eq!(mix.nu, 1024);
        assert_eq!(mix.beta_nu, 0.0);
        assert!(mix.ln_beta_nu < -1400.0);
        assert!(mix.at_least_beta_nu(1e-300));
        assert_eq!(mix.blocks(1), 1);
        assert_eq!(mix.blocks(1025), 2);
        let small = Mixing::new(0.5, 1, 2);
        assert!((small.gamma_pow(2) - 0.5625).abs() < 1e-15);
    }
}
