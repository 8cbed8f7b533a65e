//! Turns a learner (predictors with stopping rules at every confidence)
//! into a single predictor.
//!
//! `learners(i)` supplies `(Φ_(2^-i), τ_(2^-i))` for `i >= 0`. Stage `i >= 1`
//! predicts with the predictor of `learners(i - 1)` and watches the stopping
//! rule of `learners(i)`; when that rule fires after observing step `n`,
//! stage `i + 1` takes over from step `n + 1`. New components are replayed
//! over the full history, and at most one stage change happens per step.

use std::sync::Arc;

use crate::combinators::replay;
use crate::game::{Outcome, Prediction, Predictor, PredictorFactory};

/// A stopping rule `τ(x_1^n) ∈ {0, 1}`; once fired it stays fired.
pub trait StoppingRule: Send {
    fn update(&mut self, outcome: &Outcome);
    fn fired(&self) -> bool;
}

impl<R: StoppingRule + ?Sized> StoppingRule for Box<R> {
    fn update(&mut self, outcome: &Outcome) {
        (**self).update(outcome)
    }
    fn fired(&self) -> bool {
        (**self).fired()
    }
}

pub type StoppingFactory = Arc<dyn Fn() -> Box<dyn StoppingRule> + Send + Sync>;

#[derive(Clone)]
pub struct LearnerSpec {
    pub predictor: PredictorFactory,
    pub stopping: StoppingFactory,
}

pub type LearnerFamily = Arc<dyn Fn(usize) -> LearnerSpec + Send + Sync>;

pub struct StagedLearner {
    learners: LearnerFamily,
    stage: usize,
    predictor: Box<dyn Predictor>,
    rule: Box<dyn StoppingRule>,
    history: Vec<Outcome>,
    transitions: Vec<u64>,
}

impl StagedLearner {
    pub fn new(learners: LearnerFamily) -> Self {
        let predictor = (learners(0).predictor)();
        let rule = (learners(1).stopping)();
        Self {
            learners,
            stage: 1,
            predictor,
            rule,
            history: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Steps after which each stage change happened.
    pub fn transitions(&self) -> &[u64] {
        &self.transitions
    }
}

impl Predictor for StagedLearner {
    fn predict(&self) -> Prediction {
        self.predictor.predict()
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        self.history.push(outcome.clone());
        self.predictor.observe(outcome, None);
        self.rule.update(outcome);
        if self.rule.fired() {
            self.stage += 1;
            self.transitions.push(self.history.len() as u64);
            let mut predictor = (self.learners(self.stage - 1).predictor)();
            replay(predictor.as_mut(), &self.history);
            let mut rule = (self.learners(self.stage).stopping)();
            for x in &self.history {
                rule.update(x);
            }
            self.predictor = predictor;
            self.rule = rule;
        }
    }
}

impl StagedLearner {
    fn learners(&self, i: usize) -> LearnerSpec {
        (self.learners)(i)
    }
}

/// Fires once `n` outcomes have been seen.
#[derive(Debug, Clone)]
pub struct FixedTime {
    at: u64,
    seen: u64,
}

impl FixedTime {
    pub fn new(at: u64) -> Self {
        Self { at, seen: 0 }
    }
}

impl StoppingRule for FixedTime {
    fn update(&mut self, _: &Outcome) {
        self.seen += 1;
    }

    fn fired(&self) -> bool {
        self.seen >= self.at
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::simple::Constant;

    fn family(fire_at: impl Fn(usize) -> u64 + Send + Sync + 'static) -> LearnerFamily {
        let fire_at = Arc::new(fire_at);
        Arc::new(move |i| {
            let at = fire_at(i);
            LearnerSpec {
                predictor: Arc::new(move || Box::new(Constant::new(Prediction::Natural(i as u64)))),
                stopping: Arc::new(move || Box::new(FixedTime::new(at))),
            }
        })
    }

    #[test]
    fn immediate_rules_advance_every_step() {
        // A rule built for stage i fires once the history has i outcomes,
        // i.e. on the first live step of that stage.
        let mut s = StagedLearner::new(family(|i| i as u64));
        for n in 1..=20u64 {
            assert_eq!(s.stage() as u64, n);
            assert_eq!(s.predict(), Prediction::Natural(n - 1));
            s.observe(&Outcome::Nat(0), None);
        }
    }

    #[test]
    fn never_firing_stays_in_stage_one() {
        let mut s = StagedLearner::new(family(|_| u64::MAX));
        for _ in 0..1000 {
            s.observe(&Outcome::Nat(0), None);
        }
        assert_eq!(s.stage(), 1);
        assert!(s.transitions().is_empty());
    }

    #[test]
    fn switch_after_firing_step() {
        let mut s = StagedLearner::new(family(|i| if i == 1 { 7 } else { u64::MAX }));
        let mut preds = Vec::new();
        for _ in 0..10 {
            preds.push(s.predict());
            s.observe(&Outcome::Nat(0), None);
        }
        assert_eq!(preds[6], Prediction::Natural(0));
        assert_eq!(preds[7], Prediction::Natural(1));
        assert_eq!(s.transitions(), &[7]);
    }
}
