//! Rationality of a Bernoulli parameter.
//!
//! Stage `k` has tolerance `ε_k = 1/(k 2^(k+1))` and sample size `b_k`, the
//! Chebyshev budget `Var / (b_k ε_k^2) <= 2^-k`. At `b_k` samples the stage
//! freezes the running mean `x̄` and answers "rational" iff `x̄` lies within
//! `ε_k` of one of the first `k + 1` enumerated rationals. Stages are glued
//! by [`NestedUnion`], so stage `k` answers from `b_k` until `b_(k+1)`.

use std::sync::Arc;

use crate::combinators::nested::{EtaPredictorSpec, NestedFamily, NestedUnion};
use crate::error::Result;
use crate::game::{Outcome, Prediction, Predictor};
use crate::predictors::rationals::RationalEnumeration;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverStage {
    pub k: u32,
    pub epsilon: f64,
    pub sample_bound: u64,
}

/// Stage parameters. `tight_variance` uses `Var <= 1/4` instead of 1.
pub fn cover_stage(k: u32, tight_variance: bool) -> CoverStage {
    assert!(k >= 1);
    let epsilon = 1.0 / (k as f64 * 2f64.powi(k as i32 + 1));
    // 2^k / ε_k^2 = k^2 2^(3k+2); the tighter variance removes a factor 4.
    let shift = 3 * k + if tight_variance { 0 } else { 2 };
    let sample_bound = 1u64
        .checked_shl(shift)
        .filter(|_| shift < 64)
        .and_then(|p| p.checked_mul(k as u64 * k as u64))
        .unwrap_or(u64::MAX);
    CoverStage {
        k,
        epsilon,
        sample_bound,
    }
}

/// The stage-`k` decision on a frozen mean: `true` means rational.
pub fn cover_rule(mean: f64, k: u32) -> bool {
    let eps = cover_stage(k, false).epsilon;
    RationalEnumeration
        .iter()
        .take(k as usize + 1)
        .any(|r| (mean - r.value()).abs() < eps)
}

/// One stage: the rule applied to the mean of the first `b_k` bits.
#[derive(Debug, Clone)]
pub struct CoverStagePredictor {
    stage: CoverStage,
    ones: u64,
    seen: u64,
}

impl CoverStagePredictor {
    pub fn new(stage: CoverStage) -> Self {
        Self {
            stage,
            ones: 0,
            seen: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.seen == 0 {
            0.0
        } else {
            self.ones as f64 / self.seen as f64
        }
    }
}

impl Predictor for CoverStagePredictor {
    fn predict(&self) -> Prediction {
        Prediction::Binary(cover_rule(self.mean(), self.stage.k))
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        if self.seen < self.stage.sample_bound {
            self.seen += 1;
            self.ones += u64::from(outcome.as_nat().unwrap_or(0) != 0);
        }
    }
}

pub fn cover_family(tight_variance: bool) -> NestedFamily {
    NestedFamily::new(
        move |i| {
            let stage = cover_stage(i as u32, tight_variance);
            EtaPredictorSpec {
                factory: Arc::new(move || Box::new(CoverStagePredictor::new(stage))),
                sample_bound: stage.sample_bound,
                eta: 0.5f64.powi(i as i32),
            }
        },
        true,
    )
}

/// The full e.a.s. rationality predictor.
pub fn cover_predictor(tight_variance: bool) -> Result<NestedUnion> {
    NestedUnion::new(cover_family(tight_variance))
}

/// How far an irrational parameter sits from the excluded balls
/// `B(r_i, 1/(k 2^i))`, `i <= balls`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallCertificate {
    pub k: u32,
    pub balls: usize,
    /// `min_i |p - r_i| - 1/(k 2^i)`; nonnegative means outside every checked ball.
    pub min_gap: f64,
    /// Total radius of the unchecked balls, `2^-balls / k`.
    pub tail_bound: f64,
}

impl BallCertificate {
    pub fn outside_checked(&self) -> bool {
        self.min_gap >= 0.0
    }
}

pub fn ball_certificate(p: f64, k: u32, balls: usize) -> BallCertificate {
    let min_gap = RationalEnumeration
        .iter()
        .take(balls)
        .enumerate()
        .map(|(i, r)| (p - r.value()).abs() - 0.5f64.powi(i as i32 + 1) / k as f64)
        .fold(f64::INFINITY, f64::min);
    BallCertificate {
        k,
        balls,
        min_gap,
        tail_bound: 0.5f64.powf(balls as f64) / k as f64,
    }
}
