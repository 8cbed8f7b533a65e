//! Explicit mean predictor for distributions with a finite first moment.
//!
//! With checkpoints `N(m) = m^4 2^m` (2, 64, 648, 4096, ...), from `N(m)`
//! until `N(m+1)` it emits the mean of the first `N(m)` values truncated at
//! level `m`: `sum_(i <= N(m)) x_i 1{|x_i| <= m} / N(m)`. Before `N(1)` it
//! emits 0.

use crate::game::{Outcome, Prediction, Predictor};

/// Levels tracked; `N(32)` is about `4.5e15` observations.
pub const MAX_LEVEL: u32 = 32;

pub fn checkpoint(m: u32) -> u64 {
    (m as u64).pow(4) << m
}

#[derive(Debug, Clone)]
pub struct SllnPredictor {
    /// `sums[m - 1]` accumulates values with `|x| <= cutoff(m)`.
    sums: Vec<f64>,
    fixed_truncation: Option<f64>,
    seen: u64,
    level: u32,
    estimate: f64,
}

impl Default for SllnPredictor {
    fn default() -> Self {
        Self::new()
    }
}

impl SllnPredictor {
    pub fn new() -> Self {
        Self {
            sums: vec![0.0; MAX_LEVEL as usize],
            fixed_truncation: None,
            seen: 0,
            level: 0,
            estimate: 0.0,
        }
    }

    /// Uses one truncation level for every checkpoint instead of `m`.
    pub fn with_truncation(level: f64) -> Self {
        Self {
            fixed_truncation: Some(level),
            ..Self::new()
        }
    }

    fn cutoff(&self, m: u32) -> f64 {
        self.fixed_truncation.unwrap_or(m as f64)
    }

    /// Last checkpoint level reached, 0 before `N(1)`.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }
}

impl Predictor for SllnPredictor {
    fn predict(&self) -> Prediction {
        Prediction::Real(self.estimate)
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        let x = outcome.as_real().expect("scalar outcomes");
        self.seen += 1;
        for m in (self.level + 1)..=MAX_LEVEL {
            if x.abs() <= self.cutoff(m) {
                self.sums[m as usize - 1] += x;
            }
        }
        let next = self.level + 1;
        if next <= MAX_LEVEL && self.seen == checkpoint(next) {
            self.level = next;
            self.estimate = self.sums[next as usize - 1] / self.seen as f64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints() {
        assert_eq!(checkpoint(1), 2);
        assert_eq!(checkpoint(2), 64);
        assert_eq!(checkpoint(3), 648);
        assert_eq!(checkpoint(4), 4096);
        assert_eq!(checkpoint(5), 20_000);
    }

    #[test]
    fn fixed_truncation_example() {
        let mut p = SllnPredictor::with_truncation(10.0);
        for x in [5.0, -2.0, 100.0] {
            p.observe(&Outcome::Real(x), None);
        }
        assert_eq!(p.estimate(), 1.5);
    }

    #[test]
    fn truncation_by_level() {
        // Level 1 truncates at 1, level 2 at 2.
        let mut p = SllnPredictor::new();
        p.observe(&Outcome::Nat(1), None);
        assert_eq!(p.predict(), Prediction::Real(0.0));
        p.observe(&Outcome::Nat(3), None);
        assert_eq!(p.estimate(), 0.5);
        for i in 2..64 {
            p.observe(&Outcome::Nat(if i % 2 == 0 { 2 } else { 5 }), None);
        }
        // 1 + 31 twos; the 3 and the fives exceed level 2.
        assert_eq!(p.level(), 2);
        assert_eq!(p.estimate(), (1.0 + 62.0) / 64.0);
    }

    #[test]
    fn zero_stream() {
        let mut p = SllnPredictor::new();
        for _ in 0..5000 {
            p.observe(&Outcome::Nat(0), None);
            assert_eq!(p.predict(), Prediction::Real(0.0));
        }
    }
}
