//! Admissible scalar input functions, weighted local objectives and the
//! optimum-interval algebra used to judge where estimates should end up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("non-finite argument {0}")]
    NonFinite(f64),
    #[error("invalid {kind} parameters: {reason}")]
    BadParams { kind: &'static str, reason: &'static str },
    #[error("function collection must not be empty")]
    EmptyCollection,
    #[error("weights must be {expected} nonnegative values summing to 1")]
    BadWeights { expected: usize },
    #[error("no exact argmin for smooth members; use argmin_interval_scan")]
    NoExactArgmin,
}

/// Which subgradient to report where the subdifferential is an interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgradientRule {
    Left,
    Right,
    #[default]
    Midpoint,
}

/// Parameters of one input function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FnKind<T> {
    /// `w |x − c|`
    AbsShift { c: T, w: T },
    /// zero on `[a, b]`, slope `−sl` to the left and `sr` to the right
    FlatBottom { a: T, b: T, sl: T, sr: T },
    /// `sqrt((x − c)² + eps²) − eps`, differentiable, argmin `{c}`
    SmoothAbs { c: T, eps: T },
}

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Interval { lo, hi }
    }

    pub fn point(x: T) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn distance(&self, x: T) -> T {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            T::zero()
        }
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Self) -> Self {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }
}

/// A validated admissible function: convex, Lipschitz, compact argmin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ScalarConvexFn<T> {
    kind: FnKind<T>,
}

fn finite<T: Scalar>(x: T) -> Result<T, ObjectiveError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ObjectiveError::NonFinite(x.to_f64_lossy()))
    }
}

impl<T: Scalar> ScalarConvexFn<T> {
    pub fn new(kind: FnKind<T>) -> Result<Self, ObjectiveError> {
        let all_finite = match kind {
            FnKind::AbsShift { c, w } => c.is_finite() && w.is_finite(),
            FnKind::FlatBottom { a, b, sl, sr } => {
                a.is_finite() && b.is_finite() && sl.is_finite() && sr.is_finite()
            }
            FnKind::SmoothAbs { c, eps } => c.is_finite() && eps.is_finite(),
        };
        let bad = |kind, reason| Err(ObjectiveError::BadParams { kind, reason });
        if !all_finite {
            return bad("function", "parameters must be finite");
        }
        match kind {
            FnKind::AbsShift { w, .. } if w <= T::zero() => bad("abs_shift", "w must be positive"),
            FnKind::FlatBottom { a, b, .. } if a > b => bad("flat_bottom", "a must not exceed b"),
            FnKind::FlatBottom { sl, sr, .. } if sl <= T::zero() || sr <= T::zero() => {
                bad("flat_bottom", "slopes must be positive")
            }
            FnKind::SmoothAbs { eps, .. } if eps <= T::zero() => bad("smooth_abs", "eps must be positive"),
            _ => Ok(ScalarConvexFn { kind }),
        }
    }

    pub fn abs_shift(c: T, w: T) -> Result<Self, ObjectiveError> {
        Self::new(FnKind::AbsShift { c, w })
    }

    pub fn flat_bottom(a: T, b: T, sl: T, sr: T) -> Result<Self, ObjectiveError> {
        Self::new(FnKind::FlatBottom { a, b, sl, sr })
    }

    pub fn smooth_abs(c: T, eps: T) -> Result<Self, ObjectiveError> {
        Self::new(FnKind::SmoothAbs { c, eps })
    }

    pub fn kind(&self) -> &FnKind<T> {
        &self.kind
    }

    pub fn eval(&self, x: T) -> Result<T, ObjectiveError> {
        let x = finite(x)?;
        Ok(match self.kind {
            FnKind::AbsShift { c, w } => w * (x - c).abs(),
            FnKind::FlatBottom { a, b, sl, sr } => {
                if x < a {
                    sl * (a - x)
                } else if x > b {
                    sr * (x - b)
                } else {
                    T::zero()
                }
            }
            FnKind::SmoothAbs { c, eps } => ((x - c) * (x - c) + eps * eps).sqrt() - eps,
        })
    }

    /// The subdifferential `[lo, hi]` at `x` (a single point where smooth).
    pub fn subdifferential(&self, x: T) -> Result<Interval<T>, ObjectiveError> {
        let x = finite(x)?;
        let z = T::zero();
        Ok(match self.kind {
            FnKind::AbsShift { c, w } => {
                if x < c {
                    Interval::point(-w)
                } else if x > c {
                    Interval::point(w)
                } else {
                    Interval::new(-w, w)
                }
            }
            FnKind::FlatBottom { a, b, sl, sr } => {
                // left and right derivatives
                let lo = if x <= a { -sl } else if x <= b { z } else { sr };
                let hi = if x < a { -sl } else if x < b { z } else { sr };
                Interval::new(lo, hi)
            }
            FnKind::SmoothAbs { c, eps } => {
                let d = x - c;
                Interval::point(d / (d * d + eps * eps).sqrt())
            }
        })
    }

    pub fn subgrad_with(&self, x: T, rule: SubgradientRule) -> Result<T, ObjectiveError> {
        let s = self.subdifferential(x)?;
        Ok(match rule {
            SubgradientRule::Left => s.lo,
            SubgradientRule::Right => s.hi,
            SubgradientRule::Midpoint => (s.lo + s.hi) / T::lit(2.0),
        })
    }

    /// Midpoint subgradient.
    pub fn subgrad(&self, x: T) -> Result<T, ObjectiveError> {
        self.subgrad_with(x, SubgradientRule::Midpoint)
    }

    pub fn lipschitz(&self) -> T {
        match self.kind {
            FnKind::AbsShift { w, .. } => w,
            FnKind::FlatBottom { sl, sr, .. } => sl.max(sr),
            FnKind::SmoothAbs { .. } => T::one(),
        }
    }

    /// The optimum set `X_j`.
    pub fn argmin(&self) -> Interval<T> {
        match self.kind {
            FnKind::AbsShift { c, .. } | FnKind::SmoothAbs { c, .. } => Interval::point(c),
            FnKind::FlatBottom { a, b, .. } => Interval::new(a, b),
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        !matches!(self.kind, FnKind::SmoothAbs { .. })
    }

    pub fn is_differentiable(&self) -> bool {
        matches!(self.kind, FnKind::SmoothAbs { .. })
    }

    fn breakpoints(&self) -> Vec<T> {
        match self.kind {
            FnKind::AbsShift { c, .. } => vec![c],
            FnKind::FlatBottom { a, b, .. } => vec![a, b],
            FnKind::SmoothAbs { .. } => Vec::new(),
        }
    }
}

/// An ordered list of `k ≥ 1` input functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FnCollection<T> {
    members: Vec<ScalarConvexFn<T>>,
}

impl<T: Scalar> FnCollection<T> {
    pub fn new(members: Vec<ScalarConvexFn<T>>) -> Result<Self, ObjectiveError> {
        if members.is_empty() {
            return Err(ObjectiveError::EmptyCollection);
        }
        Ok(FnCollection { members })
    }

    pub fn members(&self) -> &[ScalarConvexFn<T>] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Largest member Lipschitz constant.
    pub fn lipschitz(&self) -> T {
        self.members.iter().map(|h| h.lipschitz()).fold(T::zero(), T::max)
    }

    pub fn argmins(&self) -> Vec<Interval<T>> {
        self.members.iter().map(|h| h.argmin()).collect()
    }

    pub fn all_piecewise_linear(&self) -> bool {
        self.members.iter().all(|h| h.is_piecewise_linear())
    }

    pub fn all_differentiable(&self) -> bool {
        self.members.iter().all(|h| h.is_differentiable())
    }

    /// `X = argmin (1/k) Σ h_j`, exact for piecewise-linear members and by
    /// bisection otherwise.
    pub fn optimum(&self) -> Interval<T> {
        let w = T::one() / T::from_usize_lossy(self.k());
        let terms: Vec<_> = self.members.iter().map(|h| (w, h)).collect();
        argmin_interval(&terms).unwrap_or_else(|_| argmin_interval_scan(&terms, T::lit(1e-12)))
    }

    /// Gradient vector `(h_1'(x), .., h_k'(x))`.
    pub fn subgrads(&self, x: T, rule: SubgradientRule) -> Result<Vec<T>, ObjectiveError> {
        self.members.iter().map(|h| h.subgrad_with(x, rule)).collect()
    }
}

/// `g_i = Σ_j A_ji h_j` for one agent.
#[derive(Clone, Debug)]
pub struct LocalObjective<'a, T> {
    weights: Vec<T>,
    collection: &'a FnCollection<T>,
}

impl<'a, T: Scalar> LocalObjective<'a, T> {
    pub fn new(weights: Vec<T>, collection: &'a FnCollection<T>) -> Result<Self, ObjectiveError> {
        let k = collection.k();
        let sum: T = weights.iter().copied().sum();
        let ok = weights.len() == k
            && weights.iter().all(|&w| w.is_finite() && w >= T::zero())
            && (sum - T::one()).abs() <= T::lit(1e-9);
        if !ok {
            return Err(ObjectiveError::BadWeights { expected: k });
        }
        Ok(LocalObjective { weights, collection })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    fn terms(&self) -> impl Iterator<Item = (T, &'a ScalarConvexFn<T>)> + '_ {
        self.weights
            .iter()
            .zip(self.collection.members())
            .filter(|(&w, _)| w > T::zero())
            .map(|(&w, h)| (w, h))
    }

    pub fn eval(&self, x: T) -> Result<T, ObjectiveError> {
        let mut acc = T::zero();
        for (w, h) in self.terms() {
            acc = acc + w * h.eval(x)?;
        }
        Ok(acc)
    }

    /// Weighted sum of member subgradients. Since the subdifferential of the
    /// sum is the Minkowski sum of the members', each rule picks the matching
    /// endpoint (or midpoint) of the sum's subdifferential.
    pub fn subgrad_with(&self, x: T, rule: SubgradientRule) -> Result<T, ObjectiveError> {
        let mut acc = T::zero();
        for (w, h) in self.terms() {
            acc = acc + w * h.subgrad_with(x, rule)?;
        }
        Ok(acc)
    }

    pub fn subgrad(&self, x: T) -> Result<T, ObjectiveError> {
        self.subgrad_with(x, SubgradientRule::Midpoint)
    }

    /// `Y^i = argmin g_i`.
    pub fn argmin(&self) -> Interval<T> {
        let terms: Vec<_> = self.terms().collect();
        argmin_interval(&terms).unwrap_or_else(|_| argmin_interval_scan(&terms, T::lit(1e-12)))
    }
}

fn slope_right<T: Scalar>(terms: &[(T, &ScalarConvexFn<T>)], x: T) -> T {
    terms
        .iter()
        .map(|&(w, h)| w * h.subdifferential(x).expect("finite").hi)
        .fold(T::zero(), |a, b| a + b)
}

fn slope_left<T: Scalar>(terms: &[(T, &ScalarConvexFn<T>)], x: T) -> T {
    terms
        .iter()
        .map(|&(w, h)| w * h.subdifferential(x).expect("finite").lo)
        .fold(T::zero(), |a, b| a + b)
}

/// Exact optimum interval of `Σ w_j h_j` (positive weights) for
/// piecewise-linear members, by scanning the slope on each segment between
/// merged breakpoints. Slopes within `1e-12 · Σ w_j L_j` of zero count as
/// flat.
pub fn argmin_interval<T: Scalar>(
    terms: &[(T, &ScalarConvexFn<T>)],
) -> Result<Interval<T>, ObjectiveError> {
    if terms.is_empty() {
        return Err(ObjectiveError::EmptyCollection);
    }
    if terms.iter().any(|(_, h)| !h.is_piecewise_linear()) {
        return Err(ObjectiveError::NoExactArgmin);
    }
    let mut bps: Vec<T> = terms.iter().flat_map(|(_, h)| h.breakpoints()).collect();
    bps.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    bps.dedup();
    let scale: T = terms.iter().map(|&(w, h)| w * h.lipschitz()).fold(T::zero(), |a, b| a + b);
    let tol = T::lit(1e-12) * scale;
    // right slope at a breakpoint is the slope of the segment to its right
    let lo = bps
        .iter()
        .copied()
        .find(|&b| slope_right(terms, b) >= -tol)
        .expect("admissible sums slope upward past the last breakpoint");
    let hi = bps
        .iter()
        .rev()
        .copied()
        .find(|&b| slope_left(terms, b) <= tol)
        .expect("admissible sums slope downward before the first breakpoint");
    Ok(Interval::new(lo, hi.max(lo)))
}

/// Optimum interval of `Σ w_j h_j` for any members, by bisection on the sign
/// of the midpoint subgradient inside the hull of the member argmins.
pub fn argmin_interval_scan<T: Scalar>(terms: &[(T, &ScalarConvexFn<T>)], tol: T) -> Interval<T> {
    let hull = terms
        .iter()
        .map(|(_, h)| h.argmin())
        .reduce(|a, b| a.hull(&b))
        .expect("at least one term");
    let sub = |x: T| {
        terms
            .iter()
            .map(|&(w, h)| w * h.subgrad(x).expect("finite"))
            .fold(T::zero(), |a, b| a + b)
    };
    let bisect = |pred: &dyn Fn(T) -> bool| {
        // smallest x in the hull with pred(x), pred monotone false -> true
        let (mut a, mut b) = (hull.lo, hull.hi);
        if pred(a) {
            return a;
        }
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            let m = a + (b - a) / T::lit(2.0);
            if pred(m) {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    let lo = bisect(&|x| sub(x) >= T::zero());
    let hi = bisect(&|x| sub(x) > T::zero());
    Interval::new(lo, hi.max(lo))
}

/// Solution-redundancy classification of a collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Redundancy {
    /// All optimum sets are the same single point.
    Case1,
    /// The optimum sets share a point (and are not all one identical point).
    Case2,
    /// No common optimum.
    Case3,
}

pub fn classify_redundancy<T: Scalar>(argmins: &[Interval<T>]) -> Redundancy {
    let first = argmins[0];
    if first.lo == first.hi && argmins.iter().all(|x| *x == first) {
        return Redundancy::Case1;
    }
    let common = argmins.iter().skip(1).try_fold(first, |acc, x| acc.intersect(x));
    if common.is_some() {
        Redundancy::Case2
    } else {
        Redundancy::Case3
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimumSet<T> {
    pub case: Redundancy,
    /// `∩ X_j` for Cases 1–2; the hull of the `X_j` for Case 3.
    pub interval: Interval<T>,
    /// False when `interval` is only a bound containing `X`.
    pub exact: bool,
}

/// `X` for redundant collections (the intersection of the member optimum
/// sets), or the convex hull bound that contains `X` otherwise.
pub fn optimum_set_global<T: Scalar>(collection: &FnCollection<T>) -> OptimumSet<T> {
    let argmins = collection.argmins();
    let case = classify_redundancy(&argmins);
    match case {
        Redundancy::Case1 | Redundancy::Case2 => {
            let x = argmins
                .iter()
                .skip(1)
                .try_fold(argmins[0], |acc, x| acc.intersect(x))
                .expect("redundant collection has a common point");
            OptimumSet { case, interval: x, exact: true }
        }
        Redundancy::Case3 => {
            let hull = argmins.iter().skip(1).fold(argmins[0], |acc, x| acc.hull(x));
            OptimumSet { case, interval: hull, exact: false }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs(c: f64) -> ScalarConvexFn<f64> {
        ScalarConvexFn::abs_shift(c, 1.0).unwrap()
    }

    fn flat(a: f64, b: f64) -> ScalarConvexFn<f64> {
        ScalarConvexFn::flat_bottom(a, b, 1.0, 1.0).unwrap()
    }

    #[test]
    fn eval_and_subgrad_examples() {
        let h = abs(2.0);
        assert_eq!(h.eval(5.0).unwrap(), 3.0);
        assert_eq!(h.subgrad(5.0).unwrap(), 1.0);
        assert_eq!(h.subgrad(2.0).unwrap(), 0.0);
        assert_eq!(flat(0.0, 1.0).eval(-2.0).unwrap(), 2.0);
        assert!(matches!(h.eval(f64::NAN), Err(ObjectiveError::NonFinite(_))));
    }

    #[test]
    fn flat_bottom_subdifferentials() {
        let h = ScalarConvexFn::flat_bottom(0.0, 1.0, 2.0, 3.0).unwrap();
        assert_eq!(h.subdifferential(-1.0).unwrap(), Interval::new(-2.0, -2.0));
        assert_eq!(h.subdifferential(0.0).unwrap(), Interval::new(-2.0, 0.0));
        assert_eq!(h.subdifferential(0.5).unwrap(), Interval::new(0.0, 0.0));
        assert_eq!(h.subdifferential(1.0).unwrap(), Interval::new(0.0, 3.0));
        assert_eq!(h.subdifferential(2.0).unwrap(), Interval::new(3.0, 3.0));
        let v = ScalarConvexFn::flat_bottom(1.0, 1.0, 2.0, 3.0).unwrap();
        assert_eq!(v.subdifferential(1.0).unwrap(), Interval::new(-2.0, 3.0));
        assert_eq!(v.subgrad_with(1.0, SubgradientRule::Left).unwrap(), -2.0);
        assert_eq!(v.subgrad_with(1.0, SubgradientRule::Right).unwrap(), 3.0);
        assert_eq!(v.subgrad(1.0).unwrap(), 0.5);
    }

    #[test]
    fn rejects_inadmissible_parameters() {
        assert!(ScalarConvexFn::abs_shift(0.0, 0.0).is_err());
        assert!(ScalarConvexFn::flat_bottom(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(ScalarConvexFn::flat_bottom(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(ScalarConvexFn::smooth_abs(0.0, -1.0).is_err());
        assert!(ScalarConvexFn::abs_shift(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn local_objective_examples() {
        let c = FnCollection::new(vec![abs(0.0), abs(4.0)]).unwrap();
        let g = LocalObjective::new(vec![1.0, 0.0], &c).unwrap();
        assert_eq!(g.eval(-3.0).unwrap(), 3.0);
        let g = LocalObjective::new(vec![0.5, 0.5], &c).unwrap();
        assert_eq!(g.eval(2.0).unwrap(), 2.0);
        let g = LocalObjective::new(vec![0.25, 0.75], &c).unwrap();
        assert_eq!(g.eval(0.0).unwrap(), 3.0);
        assert!(LocalObjective::new(vec![0.5, 0.6], &c).is_err());
    }

    #[test]
    fn argmin_examples() {
        let (a, b) = (abs(0.0), abs(4.0));
        assert_eq!(argmin_interval(&[(0.5, &a), (0.5, &b)]).unwrap(), Interval::new(0.0, 4.0));
        assert_eq!(argmin_interval(&[(1.0, &b)]).unwrap(), Interval::point(4.0));
        let (f1, f2) = (flat(0.0, 2.0), flat(1.0, 3.0));
        assert_eq!(argmin_interval(&[(0.5, &f1), (0.5, &f2)]).unwrap(), Interval::new(1.0, 2.0));
        let s = ScalarConvexFn::smooth_abs(1.0, 0.1).unwrap();
        assert_eq!(argmin_interval(&[(1.0, &s)]), Err(ObjectiveError::NoExactArgmin));
        let scan: Interval<f64> = argmin_interval_scan(&[(1.0, &s)], 1e-12);
        assert!((scan.lo - 1.0).abs() < 1e-9 && (scan.hi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn optimum_sets_and_cases() {
        let same = FnCollection::new(vec![flat(0.0, 1.0), flat(0.0, 1.0)]).unwrap();
        assert_eq!(optimum_set_global(&same).interval, Interval::new(0.0, 1.0));
        let touching = FnCollection::new(vec![flat(-1.0, 0.0), flat(0.0, 1.0)]).unwrap();
        let x = optimum_set_global(&touching);
        assert_eq!((x.case, x.interval), (Redundancy::Case2, Interval::point(0.0)));
        let apart = FnCollection::new(vec![flat(0.0, 1.0), flat(2.0, 3.0)]).unwrap();
        let x = optimum_set_global(&apart);
        assert_eq!((x.case, x.interval, x.exact), (Redundancy::Case3, Interval::new(0.0, 3.0), false));
        let avg = apart.optimum();
        assert!(avg.lo >= 0.0 && avg.hi <= 3.0);
        let points = FnCollection::new(vec![abs(5.0), abs(5.0)]).unwrap();
        assert_eq!(classify_redundancy(&points.argmins()), Redundancy::Case1);
    }
}
