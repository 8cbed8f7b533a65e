//! Trivial predictors used as baselines, weak learners and test fixtures.

use crate::game::{Outcome, Prediction, Predictor};

/// Emits the same prediction forever.
#[derive(Debug, Clone)]
pub struct Constant(Prediction);

impl Constant {
    pub fn new(prediction: Prediction) -> Self {
        Self(prediction)
    }
}

impl Predictor for Constant {
    fn predict(&self) -> Prediction {
        self.0.clone()
    }

    fn observe(&mut self, _: &Outcome, _: Option<bool>) {}

    fn ignores_history(&self) -> bool {
        true
    }
}

/// Predicts `Binary(x != 0)` for the last natural observed; `false` before
/// any data.
#[derive(Debug, Clone, Default)]
pub struct LastObservation {
    last: bool,
}

impl Predictor for LastObservation {
    fn predict(&self) -> Prediction {
        Prediction::Binary(self.last)
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        self.last = match outcome {
            Outcome::Nat(n) => *n != 0,
            Outcome::Real(x) => *x != 0.0,
            Outcome::Labeled { label, .. } => *label,
            Outcome::Vector(v) => v.first().is_some_and(|x| *x != 0.0),
        };
    }
}

/// Plays back a fixed list of predictions, one per observed outcome; the
/// last entry repeats once the script runs out.
#[derive(Debug, Clone)]
pub struct Scripted {
    script: Vec<Prediction>,
    step: usize,
}

impl Scripted {
    pub fn new(script: Vec<Prediction>) -> Self {
        assert!(!script.is_empty(), "empty script");
        Self { script, step: 0 }
    }

    pub fn step(&self) -> usize {
        self.step
    }
}

impl Predictor for Scripted {
    fn predict(&self) -> Prediction {
        self.script[self.step.min(self.script.len() - 1)].clone()
    }

    fn observe(&mut self, _: &Outcome, _: Option<bool>) {
        self.step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_advances_per_observation() {
        let mut p = Scripted::new(vec![Prediction::Natural(1), Prediction::Natural(2)]);
        assert_eq!(p.predict(), Prediction::Natural(1));
        p.observe(&Outcome::Nat(0), None);
        assert_eq!(p.predict(), Prediction::Natural(2));
        p.observe(&Outcome::Nat(0), None);
        assert_eq!(p.predict(), Prediction::Natural(2));
    }

    #[test]
    fn last_observation_tracks_bits() {
        let mut p = LastObservation::default();
        assert_eq!(p.predict(), Prediction::Binary(false));
        p.observe(&Outcome::Nat(1), None);
        assert_eq!(p.predict(), Prediction::Binary(true));
        p.observe(&Outcome::Nat(0), None);
        assert_eq!(p.predict(), Prediction::Binary(false));
    }
}
