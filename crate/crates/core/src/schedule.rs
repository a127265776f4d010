//! Diminishing step sizes `α(t)` with `Σ α = ∞` and `Σ α² < ∞`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid step schedule: {0}")]
pub struct ScheduleError(pub &'static str);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule<T> {
    /// `a / (t + 1)`
    Harmonic { a: T },
    /// `a / (t + 1)^p` with `p ∈ (1/2, 1]`
    Power { a: T, p: T },
}

impl<T: Scalar> StepSchedule<T> {
    pub fn harmonic(a: T) -> Result<Self, ScheduleError> {
        Self::Harmonic { a }.validated()
    }

    pub fn power(a: T, p: T) -> Result<Self, ScheduleError> {
        Self::Power { a, p }.validated()
    }

    /// Checks that the parameters give a positive, non-increasing sequence
    /// that is not summable but square-summable.
    pub fn validated(self) -> Result<Self, ScheduleError> {
        let a = match self {
            Self::Harmonic { a } | Self::Power { a, .. } => a,
        };
        if !(a.is_finite() && a > T::zero()) {
            return Err(ScheduleError("a must be positive and finite"));
        }
        if let Self::Power { p, .. } = self {
            if !(p > T::lit(0.5) && p <= T::one()) {
                return Err(ScheduleError("p must lie in (0.5, 1]"));
            }
        }
        Ok(self)
    }

    pub fn alpha(&self, t: usize) -> T {
        let t1 = T::from_usize_lossy(t + 1);
        match *self {
            Self::Harmonic { a } => a / t1,
            Self::Power { a, p } => a / t1.powf(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_values() {
        let s = StepSchedule::harmonic(0.5).unwrap();
        assert_eq!(s.alpha(0), 0.5);
        assert_eq!(s.alpha(1), 0.25);
    }

    #[test]
    fn non_increasing_and_positive() {
        for s in [StepSchedule::harmonic(2.0).unwrap(), StepSchedule::power(1.0, 0.75).unwrap()] {
            for t in 0..1000 {
                assert!(s.alpha(t) > 0.0);
                assert!(s.alpha(t + 1) <= s.alpha(t));
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StepSchedule::harmonic(0.0).is_err());
        assert!(StepSchedule::power(1.0, 0.5).is_err());
        assert!(StepSchedule::power(1.0, 1.5).is_err());
    }
}
