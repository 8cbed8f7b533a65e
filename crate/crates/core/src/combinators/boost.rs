//! Majority boosting of a weak binary predictor.
//!
//! Stage `n` reads `n^2` outcomes as `n` blocks of length `n`. A fresh weak
//! predictor sees each block and casts its final answer as a vote. The
//! stage's majority is emitted for every step of the following stage; a tied
//! vote repeats the previous majority, and the first stage emits `false`.

use crate::game::{Outcome, Prediction, Predictor, PredictorFactory};

pub struct BoostMajority {
    weak: PredictorFactory,
    stage: u64,
    block: u64,
    offset: u64,
    learner: Box<dyn Predictor>,
    yes: u64,
    output: bool,
    majorities: Vec<bool>,
}

fn vote(p: &Prediction) -> bool {
    match p {
        Prediction::Binary(b) => *b,
        Prediction::Class(c) => *c == 1,
        Prediction::Natural(n) => *n != 0,
        Prediction::Real(x) => *x >= 0.5,
        Prediction::Distribution(d) => d.get(1).is_some_and(|p1| *p1 > 0.5),
    }
}

impl BoostMajority {
    pub fn new(weak: PredictorFactory) -> Self {
        let learner = weak();
        Self {
            weak,
            stage: 1,
            block: 0,
            offset: 0,
            learner,
            yes: 0,
            output: false,
            majorities: Vec::new(),
        }
    }

    /// Stage currently collecting outcomes (1-based).
    pub fn stage(&self) -> u64 {
        self.stage
    }

    /// Majority vote of every completed stage, in order.
    pub fn majorities(&self) -> &[bool] {
        &self.majorities
    }
}

/// Step at which stage `n` starts emitting its majority: `1 + sum_(i<=n) i^2`.
pub fn emission_start(n: u64) -> u64 {
    1 + n * (n + 1) * (2 * n + 1) / 6
}

impl Predictor for BoostMajority {
    fn predict(&self) -> Prediction {
        Prediction::Binary(self.output)
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        self.learner.observe(outcome, None);
        self.offset += 1;
        if self.offset < self.stage {
            return;
        }
        self.yes += u64::from(vote(&self.learner.predict()));
        self.block += 1;
        self.offset = 0;
        self.learner = (self.weak)();
        if self.block == self.stage {
            let no = self.stage - self.yes;
            if self.yes != no {
                self.output = self.yes > no;
            }
            self.majorities.push(self.output);
            self.stage += 1;
            self.block = 0;
            self.yes = 0;
        }
    }
}
