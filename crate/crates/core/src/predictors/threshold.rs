//! Online classification with threshold concepts `h_a(x) = 1{x < a}`.

use std::sync::Arc;

use crate::combinators::back_and_forth::BackAndForth;
use crate::game::{Outcome, Prediction, Predictor};
use crate::predictors::rationals::RationalEnumeration;

/// Always proposes the same threshold.
#[derive(Debug, Clone, Copy)]
pub struct FixedThreshold(pub f64);

impl Predictor for FixedThreshold {
    fn predict(&self) -> Prediction {
        Prediction::Real(self.0)
    }

    fn observe(&mut self, _: &Outcome, _: Option<bool>) {}

    fn ignores_history(&self) -> bool {
        true
    }
}

/// Back-and-forth over the thresholds `r_1, r_2, ...` of the rational
/// enumeration. Settles after at most `i(i+1)/2 - 1` mistakes when `a = r_i`.
pub fn rational_threshold_online() -> BackAndForth {
    BackAndForth::new(Arc::new(|i| {
        Box::new(FixedThreshold(RationalEnumeration.at(i).value()))
    }))
}
