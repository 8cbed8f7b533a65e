//! Insurance against a tight class: predict a bound `y_k` on the next draw,
//! with loss when the draw exceeds it.

use std::fmt;
use std::sync::Arc;

use crate::combinators::identify::MembershipTester;
use crate::error::{Error, Result};
use crate::game::{Outcome, Prediction, Predictor};
use crate::models::ModelSpec;

/// Largest bound searched; a tail still above `2^-k` there yields this value.
const SEARCH_LIMIT: u64 = 1 << 62;

/// `n_k`, `k >= 1`: the bound the insurance predictor quotes at step `k`.
#[derive(Clone)]
pub struct QuantileSchedule {
    values: Arc<[u64]>,
}

impl fmt::Debug for QuantileSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<u64> = (1..=8).map(|k| self.at(k)).collect();
        f.debug_struct("QuantileSchedule").field("head", &head).finish()
    }
}

impl QuantileSchedule {
    /// Explicit values; the last one repeats. Must be nondecreasing.
    pub fn explicit(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("empty schedule".into()));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config(format!("schedule {values:?} decreases")));
        }
        Ok(Self { values: values.into() })
    }

    /// Minimal schedule `min{n : max_p P(X >= n) <= 2^-k}`; callers go
    /// through [`crate::models::tight_class_schedule`], which validates.
    ///
    /// `2^-k` underflows to 0 from `k = 1075` on, so the table stops at the
    /// first such `k` and its last entry serves every later step.
    pub(crate) fn from_family(family: Vec<ModelSpec>) -> Self {
        let mut table = Vec::new();
        for k in 1.. {
            let level = 0.5f64.powf(k as f64);
            table.push(family_quantile(&family, level));
            if level == 0.0 {
                break;
            }
        }
        Self { values: table.into() }
    }

    pub fn at(&self, k: u64) -> u64 {
        assert!(k >= 1, "schedule is 1-based");
        self.values[(k as usize).min(self.values.len()) - 1]
    }
}

fn family_quantile(family: &[ModelSpec], level: f64) -> u64 {
    let sup_tail = |n: u64| family.iter().map(|p| p.tail_at_least(n).unwrap()).fold(0.0, f64::max);
    if sup_tail(0) <= level {
        return 0;
    }
    // Exponential search then bisection on the nonincreasing tail.
    let mut hi = 1u64;
    while sup_tail(hi) > level {
        if hi >= SEARCH_LIMIT {
            return SEARCH_LIMIT;
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if sup_tail(mid) <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Quotes `n_k` at step `k`, independent of the data.
#[derive(Debug, Clone)]
pub struct InsurancePredictor {
    schedule: QuantileSchedule,
    step: u64,
}

impl InsurancePredictor {
    pub fn new(schedule: QuantileSchedule) -> Self {
        Self { schedule, step: 1 }
    }
}

impl Predictor for InsurancePredictor {
    fn predict(&self) -> Prediction {
        Prediction::Natural(self.schedule.at(self.step))
    }

    fn observe(&mut self, _: &Outcome, _: Option<bool>) {
        self.step += 1;
    }
}

/// Tests whether a distribution over the naturals lies in the ℓ1 ball of
/// radius `r` around `center`, against the complement of the ball of radius
/// `r + t`.
///
/// Only the prefix `0..n` matters, where `n = min{n : P_center(X >= n) <= t/4}`.
/// Each prefix frequency is estimated to `δ = t / (4n)` by Hoeffding with a
/// union bound, and the answer is inside iff the prefix ℓ1 distance is at most
/// `r + t/2`.
#[derive(Debug, Clone)]
pub struct InsuranceTester {
    center: Vec<f64>,
    radius: f64,
    margin: f64,
    prefix: usize,
}

impl InsuranceTester {
    /// `center[x]` is the center's mass at `x`.
    pub fn new(center: Vec<f64>, radius: f64, margin: f64) -> Result<Self> {
        if !(margin > 0.0) {
            return Err(Error::Config(format!("margin {margin} must be positive")));
        }
        if !(radius >= 0.0) {
            return Err(Error::Config(format!("radius {radius} must be nonnegative")));
        }
        if center.is_empty() || center.iter().any(|w| *w < 0.0) {
            return Err(Error::Config("center must be a nonempty nonnegative vector".into()));
        }
        let total: f64 = center.iter().sum();
        let mut tail = total;
        let mut prefix = 0;
        while tail > margin / 4.0 && prefix < center.len() {
            tail -= center[prefix];
            prefix += 1;
        }
        Ok(Self {
            center,
            radius,
            margin,
            prefix: prefix.max(1),
        })
    }

    pub fn prefix(&self) -> usize {
        self.prefix
    }

    pub fn accuracy(&self) -> f64 {
        self.margin / (4.0 * self.prefix as f64)
    }

    /// Prefix ℓ1 distance between the empirical law of `samples` and the
    /// center.
    pub fn prefix_distance(&self, samples: &[Outcome]) -> f64 {
        let mut counts = vec![0u64; self.prefix];
        for x in samples {
            if let Some(v) = x.as_nat() {
                if (v as usize) < self.prefix {
                    counts[v as usize] += 1;
                }
            }
        }
        let n = samples.len().max(1) as f64;
        counts
            .iter()
            .zip(&self.center)
            .map(|(&c, &p)| (c as f64 / n - p).abs())
            .sum()
    }

    pub fn decide(&self, distance: f64) -> bool {
        distance <= self.radius + self.margin / 2.0
    }
}

impl MembershipTester for InsuranceTester {
    fn budget(&self, eta: f64) -> u64 {
        let d = self.accuracy();
        ((2.0 * self.prefix as f64 / eta).ln() / (2.0 * d * d)).ceil().max(1.0) as u64
    }

    fn test(&self, samples: &[Outcome], _: f64) -> bool {
        self.decide(self.prefix_distance(samples))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{tight_class_schedule, ModelKind};

    #[test]
    fn geometric_schedule_and_first_step() {
        let geo = ModelSpec::geometric(0.5).unwrap();
        let s = tight_class_schedule(&[geo]).unwrap();
        assert_eq!(InsurancePredictor::new(s.clone()).predict(), Prediction::Natural(2));
        let mut p = InsurancePredictor::new(s);
        let mut last = 0;
        for k in 1..200u64 {
            let Prediction::Natural(y) = p.predict() else {
                unreachable!()
            };
            assert_eq!(y, k + 1);
            assert!(y >= last);
            last = y;
            p.observe(&Outcome::Nat(1), None);
        }
    }

    #[test]
    fn bounded_support_schedule() {
        let u = ModelSpec::new(ModelKind::Categorical {
            weights: vec![1.0 / 9.0; 9],
            offset: 1,
        })
        .unwrap();
        let s = tight_class_schedule(&[u]).unwrap();
        // P(X >= 10) = 0 while P(X >= 9) = 1/9 > 2^-4.
        assert!((4..40).all(|k| s.at(k) == 10));
        assert_eq!(s.at(3), 9);
    }

    #[test]
    fn explicit_schedule() {
        let s = QuantileSchedule::explicit(vec![1, 3, 3, 7]).unwrap();
        assert_eq!((1..=6).map(|k| s.at(k)).collect::<Vec<_>>(), [1, 3, 3, 7, 7, 7]);
        assert!(QuantileSchedule::explicit(vec![3, 1]).is_err());
    }

    #[test]
    fn tester_threshold_arithmetic() {
        let t = InsuranceTester::new(vec![0.5, 0.5], 0.1, 0.2).unwrap();
        assert!(t.decide(0.15));
        assert!(t.decide(0.2));
        assert!(!t.decide(0.2001));
        assert!(InsuranceTester::new(vec![1.0], 0.1, 0.0).is_err());
        assert!(InsuranceTester::new(vec![1.0], 0.1, -1.0).is_err());
    }

    #[test]
    fn tester_accepts_center_and_rejects_far_law() {
        let center = vec![0.5, 0.25, 0.125, 0.125];
        let tester = InsuranceTester::new(center.clone(), 0.05, 0.3).unwrap();
        let eta = 0.05;
        let budget = tester.budget(eta) as usize;
        let inside = ModelSpec::categorical(center).unwrap();
        // ℓ1 distance from the center: 0.6 >= r + t = 0.35.
        let far = ModelSpec::categorical(vec![0.2, 0.25, 0.125, 0.425]).unwrap();
        let (mut acc, mut rej) = (0, 0);
        for seed in 0..100 {
            let xs: Vec<Outcome> = inside.sample_stream(seed).unwrap().take(budget).collect();
            acc += usize::from(tester.test(&xs, eta));
            let xs: Vec<Outcome> = far.sample_stream(seed).unwrap().take(budget).collect();
            rej += usize::from(!tester.test(&xs, eta));
        }
        assert!(acc >= 95 && rej >= 95, "accepted {acc}, rejected {rej}");
    }
}
