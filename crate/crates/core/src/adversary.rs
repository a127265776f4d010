//! Byzantine behaviours. Each strategy is a pure function of the round,
//! the values agents would honestly send, and a seed, so runs replay
//! bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AgentSet, DiGraph};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid adversary: {0}")]
pub struct AdversaryError(pub &'static str);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary<T> {
    /// Behaves honestly through round `at_round`, silent afterwards.
    Crash { at_round: usize },
    /// Sends `value` to everyone.
    Constant { value: T },
    /// Independent uniform draw in `[lo, hi]` per round and edge.
    RandomUniform { lo: T, hi: T },
    /// The first half (rounded up) of the sender's out-neighbors, by id,
    /// get `low`; the rest get `high`.
    Split { low: T, high: T },
    /// Receivers below the non-faulty mean get the non-faulty minimum,
    /// the others the maximum, pushing the two groups apart.
    MaxSpread,
    /// Echoes each receiver's own value back to it.
    Mirror,
}

/// What an adversary may look at when choosing a message.
#[derive(Clone, Copy, Debug)]
pub struct AdversaryContext<'a, T> {
    /// 1-based round whose messages are being produced.
    pub round: usize,
    /// Value each agent would send if honest (state or gradient).
    pub values: &'a [T],
    pub faulty: AgentSet,
    pub graph: &'a DiGraph,
    pub seed: u64,
}

impl<'a, T: Scalar> AdversaryContext<'a, T> {
    fn honest_values(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.values.len()).filter(|&i| !self.faulty.contains(i)).map(|i| self.values[i])
    }
}

impl<T: Scalar> Adversary<T> {
    pub fn validated(self) -> Result<Self, AdversaryError> {
        match self {
            Self::Constant { value } if !value.is_finite() => Err(AdversaryError("constant value must be finite")),
            Self::RandomUniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Err(AdversaryError("random_uniform needs finite lo <= hi"))
            }
            Self::Split { low, high } if !(low.is_finite() && high.is_finite()) => {
                Err(AdversaryError("split values must be finite"))
            }
            other => Ok(other),
        }
    }

    /// Message from faulty `sender` to `receiver`; `None` means nothing is
    /// sent and the receiver substitutes its default value.
    pub fn message(&self, ctx: &AdversaryContext<'_, T>, sender: usize, receiver: usize) -> Option<T> {
        match *self {
            Self::Crash { at_round } => (ctx.round <= at_round).then(|| ctx.values[sender]),
            Self::Constant { value } => Some(value),
            Self::RandomUniform { lo, hi } => {
                let mut key = [0u8; 32];
                for (chunk, word) in key.chunks_mut(8).zip([ctx.seed, ctx.round as u64, sender as u64, receiver as u64]) {
                    chunk.copy_from_slice(&word.to_le_bytes());
                }
                let u: f64 = ChaCha8Rng::from_seed(key).gen();
                Some(lo + (hi - lo) * T::lit(u))
            }
            Self::Split { low, high } => {
                let outs = ctx.graph.out_neighbors(sender).expect("sender in graph");
                let cut = outs.len().div_ceil(2);
                let rank = outs.iter().position(|j| j == receiver).unwrap_or(0);
                Some(if rank < cut { low } else { high })
            }
            Self::MaxSpread => {
                let (mut sum, mut count) = (T::zero(), 0usize);
                let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
                for v in ctx.honest_values() {
                    sum = sum + v;
                    count += 1;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if count == 0 {
                    return Some(ctx.values[sender]);
                }
                let mean = sum / T::from_usize_lossy(count);
                Some(if ctx.values[receiver] < mean { lo } else { hi })
            }
            Self::Mirror => Some(ctx.values[receiver]),
        }
    }

    /// The state shown for a faulty agent in traces. Display only; it never
    /// feeds into non-faulty updates.
    pub fn nominal_state(&self, shadow: T) -> T {
        match *self {
            Self::Constant { value } => value,
            Self::Split { low, .. } => low,
            Self::RandomUniform { lo, hi } => (lo + hi) / T::lit(2.0),
            Self::Crash { .. } | Self::MaxSpread | Self::Mirror => shadow,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx<'a>(g: &'a DiGraph, values: &'a [f64], round: usize) -> AdversaryContext<'a, f64> {
        AdversaryContext { round, values, faulty: AgentSet::singleton(3), graph: g, seed: 9 }
    }

    #[test]
    fn constant_and_crash() {
        let g = DiGraph::complete(4).unwrap();
        let v = [0.0, 1.0, 2.0, 3.0];
        let c = Adversary::Constant { value: 7.0 };
        assert!((0..3).all(|j| c.message(&ctx(&g, &v, 5), 3, j) == Some(7.0)));
        let crash = Adversary::<f64>::Crash { at_round: 0 };
        assert_eq!(crash.message(&ctx(&g, &v, 1), 3, 0), None);
        let late = Adversary::<f64>::Crash { at_round: 2 };
        assert_eq!(late.message(&ctx(&g, &v, 2), 3, 0), Some(3.0));
        assert_eq!(late.message(&ctx(&g, &v, 3), 3, 0), None);
    }

    #[test]
    fn split_on_k4() {
        let g = DiGraph::complete(4).unwrap();
        let v = [0.0; 4];
        let s = Adversary::Split { low: -1.0, high: 1.0 };
        let got: Vec<_> = (0..3).map(|j| s.message(&ctx(&g, &v, 1), 3, j)).collect();
        assert_eq!(got, vec![Some(-1.0), Some(-1.0), Some(1.0)]);
    }

    #[test]
    fn random_is_deterministic_and_in_range() {
        let g = DiGraph::complete(4).unwrap();
        let v = [0.0; 4];
        let r = Adversary::RandomUniform { lo: -2.0, hi: 5.0 };
        for round in 1..50 {
            let a = r.message(&ctx(&g, &v, round), 3, 1).unwrap();
            assert_eq!(Some(a), r.message(&ctx(&g, &v, round), 3, 1));
            assert!((-2.0..=5.0).contains(&a));
        }
        assert_ne!(r.message(&ctx(&g, &v, 1), 3, 0), r.message(&ctx(&g, &v, 1), 3, 1));
    }

    #[test]
    fn mirror_and_max_spread() {
        let g = DiGraph::complete(4).unwrap();
        let v = [0.0, 1.0, 4.0, 100.0];
        let m = Adversary::<f64>::Mirror;
        assert_eq!(m.message(&ctx(&g, &v, 1), 3, 2), Some(4.0));
        let s = Adversary::<f64>::MaxSpread;
        assert_eq!(s.message(&ctx(&g, &v, 1), 3, 0), Some(0.0));
        assert_eq!(s.message(&ctx(&g, &v, 1), 3, 2), Some(4.0));
    }

    #[test]
    fn validation() {
        assert!(Adversary::Constant { value: f64::NAN }.validated().is_err());
        assert!(Adversary::RandomUniform { lo: 1.0, hi: 0.0 }.validated().is_err());
        assert!(Adversary::<f64>::Mirror.validated().is_ok());
    }
}
