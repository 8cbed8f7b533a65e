//! Union of a nested family of η-predictable classes.
//!
//! With bounds `b_1 <= b_2 <= ...`, after `T` observations the union
//! delegates to `Φ_i` for the largest `i` with `b_i <= T`, and to `Φ_1`
//! before `b_1`. Delegates are rebuilt on activation and replayed over the
//! whole history, so each sees every outcome from step 1.

use std::fmt;
use std::sync::Arc;

use crate::combinators::replay;
use crate::error::{Error, Result};
use crate::game::{Outcome, Prediction, Predictor, PredictorFactory};

/// Number of leading bounds checked for monotonicity at construction.
pub const MONOTONE_CHECK: usize = 64;

#[derive(Clone)]
pub struct EtaPredictorSpec {
    pub factory: PredictorFactory,
    pub sample_bound: u64,
    pub eta: f64,
}

impl fmt::Debug for EtaPredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EtaPredictorSpec")
            .field("sample_bound", &self.sample_bound)
            .field("eta", &self.eta)
            .finish()
    }
}

impl EtaPredictorSpec {
    pub fn new(factory: PredictorFactory, sample_bound: u64, eta: f64) -> Result<Self> {
        if sample_bound < 1 {
            return Err(Error::Config("sample bound must be at least 1".into()));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Config(format!("eta = {eta} must lie in (0, 1)")));
        }
        Ok(Self {
            factory,
            sample_bound,
            eta,
        })
    }
}

/// 1-based accessor `i -> (Φ_i, b_i, η_i)`.
#[derive(Clone)]
pub struct NestedFamily {
    at: Arc<dyn Fn(usize) -> EtaPredictorSpec + Send + Sync>,
    pub monotone: bool,
}

impl NestedFamily {
    pub fn new<F>(at: F, monotone: bool) -> Self
    where
        F: Fn(usize) -> EtaPredictorSpec + Send + Sync + 'static,
    {
        Self {
            at: Arc::new(at),
            monotone,
        }
    }

    pub fn at(&self, i: usize) -> EtaPredictorSpec {
        assert!(i >= 1, "family is 1-based");
        (self.at)(i)
    }

    /// Bounds must be nondecreasing; checked over the first
    /// [`MONOTONE_CHECK`] members.
    pub fn validate(&self) -> Result<()> {
        if !self.monotone {
            return Err(Error::Config("nested union needs a family flagged monotone".into()));
        }
        let mut prev = 0u64;
        for i in 1..=MONOTONE_CHECK {
            let spec = self.at(i);
            if spec.sample_bound < prev {
                return Err(Error::Config(format!(
                    "sample bound {} at index {i} is below {prev} at index {}",
                    spec.sample_bound,
                    i - 1
                )));
            }
            if spec.sample_bound < 1 || !(spec.eta > 0.0 && spec.eta < 1.0) {
                return Err(Error::Config(format!("invalid member {i}: {spec:?}")));
            }
            prev = spec.sample_bound;
        }
        Ok(())
    }
}

/// Largest `i` with `bounds[i-1] <= t`, or 1 when `t < bounds[0]`.
pub fn delegate_index(bounds: &[u64], t: u64) -> usize {
    bounds.iter().take_while(|&&b| b <= t).count().max(1)
}

pub struct NestedUnion {
    family: NestedFamily,
    bounds: Vec<u64>,
    index: usize,
    delegate: Box<dyn Predictor>,
    history: Vec<Outcome>,
}

impl NestedUnion {
    pub fn new(family: NestedFamily) -> Result<Self> {
        family.validate()?;
        let first = family.at(1);
        let delegate = (first.factory)();
        Ok(Self {
            family,
            bounds: vec![first.sample_bound],
            index: 1,
            delegate,
            history: Vec::new(),
        })
    }

    pub fn delegate_index(&self) -> usize {
        self.index
    }

    fn bound(&mut self, i: usize) -> u64 {
        while self.bounds.len() < i {
            let next = self.family.at(self.bounds.len() + 1).sample_bound;
            self.bounds.push(next);
        }
        self.bounds[i - 1]
    }
}

impl Predictor for NestedUnion {
    fn predict(&self) -> Prediction {
        self.delegate.predict()
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        self.history.push(outcome.clone());
        self.delegate.observe(outcome, None);
        let t = self.history.len() as u64;
        let mut next = self.index;
        while self.bound(next + 1) <= t {
            next += 1;
        }
        if next != self.index {
            self.index = next;
            let mut delegate = (self.family.at(next).factory)();
            replay(delegate.as_mut(), &self.history);
            self.delegate = delegate;
        }
    }
}
