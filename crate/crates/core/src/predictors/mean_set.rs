//! Classification of the mean of an i.i.d. vector source into one of two
//! separated point sets.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{Outcome, Prediction, Predictor};

/// Candidate means at level `m`: class 0 (`a`) and class 1 (`b`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSets {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl MeanSets {
    /// Smallest distance between a point of `a` and a point of `b`.
    pub fn separation(&self) -> f64 {
        self.a
            .iter()
            .flat_map(|x| self.b.iter().map(move |y| dist(x, y)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Class of the nearer set; ties go to class 0.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let da = self.a.iter().map(|p| dist(p, x)).fold(f64::INFINITY, f64::min);
        let db = self.b.iter().map(|p| dist(p, x)).fold(f64::INFINITY, f64::min);
        usize::from(db < da)
    }
}

/// Moment order `p > 1` and the level accessor `m -> (A_m, B_m)`.
#[derive(Clone)]
pub struct MomentClassSpec {
    pub p_moment: f64,
    pub levels: Arc<dyn Fn(u64) -> MeanSets + Send + Sync>,
}

/// `n_m = ceil((2m 2^m / (ε_m/2)^p)^(1/(p-1)))`.
pub fn stage_samples(m: u64, p_moment: f64, separation: f64) -> u64 {
    let base = 2.0 * m as f64 * 2f64.powi(m as i32) / (separation / 2.0).powf(p_moment);
    let n = base.powf(1.0 / (p_moment - 1.0)).ceil();
    if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    }
}

/// Stage `m` ends after `n_m` samples (made nondecreasing) and answers with
/// the class nearer to the running mean; the answer holds until the next
/// stage ends. Before the first stage the running mean is used directly.
pub struct MeanSetClassifier {
    spec: MomentClassSpec,
    sums: Vec<f64>,
    seen: u64,
    stage: u64,
    next_boundary: u64,
    answer: usize,
}

/// Levels checked for positive separation at construction.
const VALIDATED_LEVELS: u64 = 16;

impl MeanSetClassifier {
    pub fn new(spec: MomentClassSpec) -> Result<Self> {
        if !(spec.p_moment > 1.0) {
            return Err(Error::Config(format!("moment order {} must exceed 1", spec.p_moment)));
        }
        for m in 1..=VALIDATED_LEVELS {
            let sets = (spec.levels)(m);
            if sets.a.is_empty() || sets.b.is_empty() {
                return Err(Error::Config(format!("level {m} has an empty mean set")));
            }
            let eps = sets.separation();
            if !(eps > 0.0) {
                return Err(Error::Config(format!("level {m} has separation {eps}")));
            }
        }
        let first = (spec.levels)(1);
        let next_boundary = stage_samples(1, spec.p_moment, first.separation()).max(1);
        Ok(Self {
            spec,
            sums: Vec::new(),
            seen: 0,
            stage: 0,
            next_boundary,
            answer: 0,
        })
    }

    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.seen.max(1) as f64;
        self.sums.iter().map(|s| s / n).collect()
    }
}

impl Predictor for MeanSetClassifier {
    fn predict(&self) -> Prediction {
        Prediction::Class(self.answer)
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        let x: Vec<f64> = match outcome {
            Outcome::Vector(v) => v.clone(),
            other => vec![other.as_real().expect("numeric outcomes")],
        };
        if self.sums.is_empty() {
            self.sums = vec![0.0; x.len()];
        }
        for (s, v) in self.sums.iter_mut().zip(&x) {
            *s += v;
        }
        self.seen += 1;
        let mean = self.mean();
        if self.stage == 0 && self.seen < self.next_boundary {
            self.answer = (self.spec.levels)(1).nearest(&mean);
        }
        if self.seen == self.next_boundary {
            self.stage += 1;
            let sets = (self.spec.levels)(self.stage);
            self.answer = sets.nearest(&mean);
            let next = (self.spec.levels)(self.stage + 1);
            self.next_boundary =
                stage_samples(self.stage + 1, self.spec.p_moment, next.separation()).max(self.seen + 1);
        }
    }
}
