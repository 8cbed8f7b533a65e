//! Identify-then-predict: a learner for a countable union of classes that
//! are each predictable and identifiable along their own nesting.
//!
//! Phase `j` tests the class `i` given by the `s` coordinate of the `j`-th
//! back-and-forth state (`1, 1, 2, 1, 2, 3, ...`) at nesting level `j` with
//! confidence `η / 2^(j+1)`. Testers draw their samples from the single
//! outcome stream, starting fresh at each phase. A positive answer commits to
//! that class for good and fires the stopping rule. Until then the current
//! candidate's predictor answers, rebuilt and replayed whenever `i` changes.

use std::sync::Arc;

use serde::Serialize;

use crate::combinators::back_and_forth::BFState;
use crate::combinators::replay;
use crate::combinators::staged::StoppingRule;
use crate::error::{Error, Result};
use crate::game::{Outcome, Prediction, Predictor, PredictorFactory};

/// Membership test of one class against its complement.
pub trait MembershipTester: Send + Sync {
    /// Fresh samples one call consumes at confidence `eta`.
    fn budget(&self, eta: f64) -> u64;

    /// `true` means inside. `samples` holds exactly `budget(eta)` outcomes.
    fn test(&self, samples: &[Outcome], eta: f64) -> bool;
}

pub type TesterLevels = Arc<dyn Fn(usize) -> Box<dyn MembershipTester> + Send + Sync>;

#[derive(Clone)]
pub struct IdentifyClass {
    /// Tester for level `j` of the class's nesting.
    pub tester: TesterLevels,
    /// The class's η/2-predictor.
    pub predictor: PredictorFactory,
}

/// 1-based class accessor; `None` past the end of a finite list.
pub type ClassFamily = Arc<dyn Fn(usize) -> Option<IdentifyClass> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase {
    pub j: usize,
    pub class: usize,
    pub confidence: f64,
    /// Outcomes observed before the phase began.
    pub started_after: u64,
    pub samples: u64,
    /// `None` while the phase is collecting samples.
    pub inside: Option<bool>,
}

pub fn phase_confidence(eta: f64, j: usize) -> f64 {
    eta / 2f64.powi(j as i32 + 1)
}

struct Running {
    tester: Box<dyn MembershipTester>,
    budget: u64,
    buffer: Vec<Outcome>,
}

pub struct IdentifyThenPredict {
    classes: ClassFamily,
    eta: f64,
    candidate: usize,
    predictor: Box<dyn Predictor>,
    running: Option<Running>,
    phases: Vec<Phase>,
    history: Vec<Outcome>,
    committed: Option<usize>,
    stopped_at: Option<u64>,
}

impl IdentifyThenPredict {
    pub fn new(classes: ClassFamily, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Config(format!("eta = {eta} must lie in (0, 1)")));
        }
        let first = classes(1).ok_or_else(|| Error::Config("class family is empty".into()))?;
        let mut me = Self {
            classes,
            eta,
            candidate: 1,
            predictor: (first.predictor)(),
            running: None,
            phases: Vec::new(),
            history: Vec::new(),
            committed: None,
            stopped_at: None,
        };
        me.start_phases();
        Ok(me)
    }

    pub fn committed(&self) -> Option<usize> {
        self.committed
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Outcomes consumed by testers across all phases.
    pub fn tester_samples(&self) -> u64 {
        self.phases.iter().map(|p| p.samples).sum()
    }

    fn switch_candidate(&mut self, class: usize, spec: &IdentifyClass) {
        if class != self.candidate {
            self.candidate = class;
            let mut p = (spec.predictor)();
            replay(p.as_mut(), &self.history);
            self.predictor = p;
        }
    }

    /// Opens phases until one is waiting for samples or a commit happens.
    fn start_phases(&mut self) {
        while self.committed.is_none() && self.running.is_none() {
            let j = self.phases.len() + 1;
            let class = BFState::after(j as u64 - 1).s;
            let confidence = phase_confidence(self.eta, j);
            let mut phase = Phase {
                j,
                class,
                confidence,
                started_after: self.history.len() as u64,
                samples: 0,
                inside: None,
            };
            let Some(spec) = (self.classes)(class) else {
                phase.inside = Some(false);
                self.phases.push(phase);
                continue;
            };
            self.switch_candidate(class, &spec);
            let tester = (spec.tester)(j);
            let budget = tester.budget(confidence);
            phase.samples = budget;
            self.phases.push(phase);
            self.running = Some(Running {
                tester,
                budget,
                buffer: Vec::with_capacity(budget.min(1 << 20) as usize),
            });
            self.finish_if_ready();
        }
    }

    fn finish_if_ready(&mut self) {
        let ready = matches!(&self.running, Some(r) if r.buffer.len() as u64 >= r.budget);
        if !ready {
            return;
        }
        let run = self.running.take().unwrap();
        let phase = self.phases.last_mut().unwrap();
        let inside = run.tester.test(&run.buffer, phase.confidence);
        phase.inside = Some(inside);
        if inside {
            self.committed = Some(phase.class);
            self.stopped_at = Some(self.history.len() as u64);
        }
    }
}

impl Predictor for IdentifyThenPredict {
    fn predict(&self) -> Prediction {
        self.predictor.predict()
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        self.history.push(outcome.clone());
        self.predictor.observe(outcome, None);
        if let Some(run) = self.running.as_mut() {
            run.buffer.push(outcome.clone());
            self.finish_if_ready();
            self.start_phases();
        }
    }

    fn stopped_at(&self) -> Option<u64> {
        self.stopped_at
    }
}

impl StoppingRule for IdentifyThenPredict {
    fn update(&mut self, outcome: &Outcome) {
        Predictor::observe(self, outcome, None);
    }

    fn fired(&self) -> bool {
        self.committed.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;
    use crate::predictors::simple::Constant;

    struct Fixed(bool, u64);

    impl MembershipTester for Fixed {
        fn budget(&self, _: f64) -> u64 {
            self.1
        }
        fn test(&self, samples: &[Outcome], _: f64) -> bool {
            assert_eq!(samples.len() as u64, self.1);
            self.0
        }
    }

    fn fixed_classes(answers: Vec<bool>, budget: u64) -> ClassFamily {
        Arc::new(move |i| {
            let inside = *answers.get(i - 1)?;
            Some(IdentifyClass {
                tester: Arc::new(move |_| Box::new(Fixed(inside, budget))),
                predictor: Arc::new(move || Box::new(Constant::new(Prediction::Natural(i as u64)))),
            })
        })
    }

    #[test]
    fn confidence_schedule() {
        assert!((phase_confidence(0.1, 3) - 0.1 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn single_inside_class_commits_at_phase_one() {
        let it = IdentifyThenPredict::new(fixed_classes(vec![true], 0), 0.1).unwrap();
        assert_eq!(it.committed(), Some(1));
        assert_eq!(it.phases().len(), 1);
    }

    #[test]
    fn walk_reaches_second_class() {
        let mut it = IdentifyThenPredict::new(fixed_classes(vec![false, true], 3), 0.1).unwrap();
        let mut preds = Vec::new();
        for _ in 0..12 {
            preds.push(it.predict());
            Predictor::observe(&mut it, &Outcome::Nat(0), None);
        }
        assert_eq!(it.committed(), Some(2));
        let classes: Vec<usize> = it.phases().iter().map(|p| p.class).collect();
        assert_eq!(classes, [1, 1, 2]);
        assert_eq!(it.stopped_at(), Some(9));
        assert_eq!(it.tester_samples(), 9);
        // Class 2's predictor answers from phase 3 on.
        assert_eq!(preds[5], Prediction::Natural(1));
        assert_eq!(preds[6], Prediction::Natural(2));
    }

    #[test]
    fn finite_family_skips_missing_classes() {
        let mut it = IdentifyThenPredict::new(fixed_classes(vec![false], 1), 0.1).unwrap();
        for _ in 0..20 {
            Predictor::observe(&mut it, &Outcome::Nat(0), None);
        }
        assert!(it.committed().is_none());
        assert!(it
            .phases()
            .iter()
            .filter(|p| p.class > 1)
            .all(|p| p.samples == 0 && p.inside == Some(false)));
    }

    /// Hoeffding test of "the Bernoulli mean lies within `radius` of `center`",
    /// with the decision threshold at `radius + margin / 2`.
    struct MeanBall {
        center: f64,
        radius: f64,
        margin: f64,
    }

    impl MembershipTester for MeanBall {
        fn budget(&self, eta: f64) -> u64 {
            let d = self.margin / 2.0;
            ((2.0 / eta).ln() / (2.0 * d * d)).ceil() as u64
        }
        fn test(&self, samples: &[Outcome], _: f64) -> bool {
            let mean = samples.iter().map(|x| x.as_real().unwrap()).sum::<f64>() / samples.len() as f64;
            (mean - self.center).abs() <= self.radius + self.margin / 2.0
        }
    }

    #[test]
    fn wrong_commit_rate_below_eta() {
        // Classes: Bernoulli means near 0.2, near 0.5, near 0.8. Truth: 0.5.
        let centers = [0.2, 0.5, 0.8];
        let classes: ClassFamily = Arc::new(move |i| {
            let center = *centers.get(i - 1)?;
            Some(IdentifyClass {
                tester: Arc::new(move |_| {
                    Box::new(MeanBall {
                        center,
                        radius: 0.02,
                        margin: 0.2,
                    })
                }),
                predictor: Arc::new(move || Box::new(Constant::new(Prediction::Natural(i as u64)))),
            })
        });
        let eta = 0.2;
        let model = ModelSpec::bernoulli(0.5, true).unwrap();
        let trials = 400;
        let mut wrong = 0;
        for seed in 0..trials {
            let mut it = IdentifyThenPredict::new(classes.clone(), eta).unwrap();
            for x in model.sample_stream(seed).unwrap().take(20_000) {
                Predictor::observe(&mut it, &x, None);
                if it.committed().is_some() {
                    break;
                }
            }
            let c = it.committed().expect("commits with probability one");
            if c != 2 {
                wrong += 1;
            }
        }
        assert!((wrong as f64 / trials as f64) <= eta, "wrong commits {wrong}");
    }
}
