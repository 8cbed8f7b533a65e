//! The prediction game: outcomes, predictions, losses, and the trajectory
//! runner every experiment goes through.
//!
//! Each round the predictor commits to a [`Prediction`] from the history it
//! has seen, nature draws the next [`Outcome`] from the fixed model, and the
//! loss is scored. Supervised losses are functions of the data alone and are
//! revealed to the predictor; unsupervised losses read the hidden
//! [`ModelAttributes`] and are never shown to it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// One draw from the model.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Natural-valued draw: Bernoulli bits, counts, Markov states.
    Nat(u64),
    Real(f64),
    /// A vector draw, e.g. the flattened entries of a random matrix.
    Vector(Vec<f64>),
    /// Online classification round: the point and its true label.
    Labeled {
        x: f64,
        label: bool,
    },
}

impl Outcome {
    pub fn as_nat(&self) -> Option<u64> {
        match *self {
            Outcome::Nat(n) => Some(n),
            _ => None,
        }
    }

    /// Numeric value for scalar outcomes; naturals are widened.
    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Outcome::Nat(n) => Some(n as f64),
            Outcome::Real(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_slice(&self) -> Option<&[f64]> {
        match self {
            Outcome::Vector(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    Binary,
    Natural,
    Real,
    Distribution,
    Class,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Binary(bool),
    Natural(u64),
    Real(f64),
    /// Probability vector: nonnegative entries summing to one within 1e-9.
    Distribution(Vec<f64>),
    Class(usize),
}

pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

impl Prediction {
    pub fn kind(&self) -> PredictionKind {
        match self {
            Prediction::Binary(_) => PredictionKind::Binary,
            Prediction::Natural(_) => PredictionKind::Natural,
            Prediction::Real(_) => PredictionKind::Real,
            Prediction::Distribution(_) => PredictionKind::Distribution,
            Prediction::Class(_) => PredictionKind::Class,
        }
    }

    /// Checked constructor for the probability-vector variant.
    pub fn distribution(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Precondition("empty probability vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Precondition(format!(
                "probability vector has a negative or non-finite entry: {weights:?}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::Precondition(format!(
                "probability vector sums to {total}, not 1"
            )));
        }
        Ok(Prediction::Distribution(weights))
    }
}

/// Ground truth about a model. Only unsupervised losses may read it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelAttributes {
    pub mean: Option<Vec<f64>>,
    pub entropy_nats: Option<f64>,
    pub is_rational: Option<bool>,
    pub stationary: Option<Vec<f64>>,
    pub property_bits: BTreeMap<String, bool>,
}

impl ModelAttributes {
    pub fn with_property(mut self, name: &str, bit: bool) -> Self {
        self.property_bits.insert(name.to_string(), bit);
        self
    }

    fn has(&self, key: &Attribute) -> bool {
        match key {
            Attribute::Mean => self.mean.is_some(),
            Attribute::Entropy => self.entropy_nats.is_some(),
            Attribute::Rationality => self.is_rational.is_some(),
            Attribute::Stationary => self.stationary.is_some(),
            Attribute::Property(name) => self.property_bits.contains_key(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attribute {
    Mean,
    Entropy,
    Rationality,
    Stationary,
    Property(String),
}

impl Attribute {
    fn label(&self) -> &'static str {
        match self {
            Attribute::Mean => "mean",
            Attribute::Entropy => "entropy_nats",
            Attribute::Rationality => "is_rational",
            Attribute::Stationary => "stationary",
            Attribute::Property(_) => "property_bits",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Supervised,
    Unsupervised,
}

type SupervisedFn = dyn Fn(&Outcome, &Prediction) -> bool + Send + Sync;
type UnsupervisedFn = dyn Fn(&ModelAttributes, &Outcome, &Prediction) -> bool + Send + Sync;

#[derive(Clone)]
enum Rule {
    // No access to model attributes, by construction.
    Supervised(Arc<SupervisedFn>),
    Unsupervised {
        requires: Vec<Attribute>,
        eval: Arc<UnsupervisedFn>,
    },
}

/// A {0,1}-valued loss. Losses here depend on the history only through the
/// latest outcome.
#[derive(Clone)]
pub struct LossEvaluator {
    name: String,
    accepts: PredictionKind,
    rule: Rule,
}

impl fmt::Debug for LossEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossEvaluator")
            .field("name", &self.name)
            .field("kind", &self.kind())
            .field("accepts", &self.accepts)
            .finish()
    }
}

impl LossEvaluator {
    pub fn supervised<F>(name: &str, accepts: PredictionKind, eval: F) -> Self
    where
        F: Fn(&Outcome, &Prediction) -> bool + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            accepts,
            rule: Rule::Supervised(Arc::new(eval)),
        }
    }

    /// `requires` lists every attribute `eval` reads; presence is checked
    /// before a run starts, so `eval` may unwrap them.
    pub fn unsupervised<F>(name: &str, accepts: PredictionKind, requires: Vec<Attribute>, eval: F) -> Self
    where
        F: Fn(&ModelAttributes, &Outcome, &Prediction) -> bool + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            accepts,
            rule: Rule::Unsupervised {
                requires,
                eval: Arc::new(eval),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn accepts(&self) -> PredictionKind {
        self.accepts
    }

    pub fn kind(&self) -> LossKind {
        match self.rule {
            Rule::Supervised(_) => LossKind::Supervised,
            Rule::Unsupervised { .. } => LossKind::Unsupervised,
        }
    }

    pub fn check_attributes(&self, attributes: &ModelAttributes) -> Result<()> {
        if let Rule::Unsupervised { requires, .. } = &self.rule {
            if let Some(missing) = requires.iter().find(|a| !attributes.has(a)) {
                return Err(Error::MissingAttribute {
                    loss: self.name.clone(),
                    attribute: missing.label(),
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, attributes: &ModelAttributes, outcome: &Outcome, prediction: &Prediction) -> Result<bool> {
        if prediction.kind() != self.accepts {
            return Err(Error::IncompatiblePrediction {
                loss: self.name.clone(),
                expected: self.accepts,
                found: prediction.kind(),
            });
        }
        Ok(match &self.rule {
            Rule::Supervised(f) => f(outcome, prediction),
            Rule::Unsupervised { eval, .. } => eval(attributes, outcome, prediction),
        })
    }
}

/// Standard losses used by the bundled experiments.
pub mod losses {
    use super::*;

    /// Rationality of a Bernoulli mean; `Binary(true)` means "rational".
    pub fn rationality() -> LossEvaluator {
        LossEvaluator::unsupervised(
            "rationality",
            PredictionKind::Binary,
            vec![Attribute::Rationality],
            |attrs, _, y| matches!(y, Prediction::Binary(b) if *b != attrs.is_rational.unwrap()),
        )
    }

    /// `1{|y - mean| >= eps}` for a scalar mean.
    pub fn mean_within(eps: f64) -> LossEvaluator {
        LossEvaluator::unsupervised(
            "mean_within",
            PredictionKind::Real,
            vec![Attribute::Mean],
            move |attrs, _, y| {
                let mean = attrs.mean.as_ref().unwrap()[0];
                matches!(y, Prediction::Real(v) if (v - mean).abs() >= eps)
            },
        )
    }

    /// Answer to "is H(p) <= threshold?" in nats.
    pub fn entropy_at_most(threshold: f64) -> LossEvaluator {
        LossEvaluator::unsupervised(
            "entropy_at_most",
            PredictionKind::Binary,
            vec![Attribute::Entropy],
            move |attrs, _, y| {
                let truth = attrs.entropy_nats.unwrap() <= threshold;
                matches!(y, Prediction::Binary(b) if *b != truth)
            },
        )
    }

    /// Answer to "does H(p) lie in the region?".
    pub fn entropy_in<F>(region: F) -> LossEvaluator
    where
        F: Fn(f64) -> bool + Send + Sync + 'static,
    {
        LossEvaluator::unsupervised(
            "entropy_in",
            PredictionKind::Binary,
            vec![Attribute::Entropy],
            move |attrs, _, y| {
                let truth = region(attrs.entropy_nats.unwrap());
                matches!(y, Prediction::Binary(b) if *b != truth)
            },
        )
    }

    /// Insurance loss `1{x_n > y_n}`.
    pub fn insurance() -> LossEvaluator {
        LossEvaluator::supervised("insurance", PredictionKind::Natural, |x, y| match (x.as_nat(), y) {
            (Some(x), Prediction::Natural(bound)) => x > *bound,
            _ => true,
        })
    }

    /// Online threshold classification: the prediction is a threshold `r`
    /// classifying `x` as `1{x < r}`; loss when that disagrees with the label.
    pub fn threshold_label() -> LossEvaluator {
        LossEvaluator::supervised("threshold_label", PredictionKind::Real, |x, y| match (x, y) {
            (Outcome::Labeled { x, label }, Prediction::Real(r)) => (*x < *r) != *label,
            _ => true,
        })
    }

    /// `1{|y - pi|_inf > eps}` against the true stationary distribution.
    pub fn stationary_within(eps: f64) -> LossEvaluator {
        LossEvaluator::unsupervised(
            "stationary_within",
            PredictionKind::Distribution,
            vec![Attribute::Stationary],
            move |attrs, _, y| {
                let pi = attrs.stationary.as_ref().unwrap();
                match y {
                    Prediction::Distribution(v) if v.len() == pi.len() => {
                        v.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > eps
                    }
                    _ => true,
                }
            },
        )
    }

    /// Binary prediction of a named ground-truth property bit.
    pub fn property_bit(name: &str) -> LossEvaluator {
        let key = name.to_string();
        LossEvaluator::unsupervised(
            "property_bit",
            PredictionKind::Binary,
            vec![Attribute::Property(key.clone())],
            move |attrs, _, y| matches!(y, Prediction::Binary(b) if *b != attrs.property_bits[&key]),
        )
    }

    /// Two-class prediction: class 1 iff the named property bit is set.
    pub fn property_class(name: &str) -> LossEvaluator {
        let key = name.to_string();
        LossEvaluator::unsupervised(
            "property_class",
            PredictionKind::Class,
            vec![Attribute::Property(key.clone())],
            move |attrs, _, y| {
                let truth = usize::from(attrs.property_bits[&key]);
                matches!(y, Prediction::Class(c) if *c != truth)
            },
        )
    }
}

/// A sequential prediction machine.
///
/// `predict` must be a pure function of the state; the state changes only
/// through `observe`. `revealed_loss` is `Some` exactly when the experiment's
/// loss is supervised.
pub trait Predictor: Send {
    fn predict(&self) -> Prediction;

    fn observe(&mut self, outcome: &Outcome, revealed_loss: Option<bool>);

    /// Needs the loss bit every round (switching combinators do).
    fn requires_supervision(&self) -> bool {
        false
    }

    /// True when `predict` never depends on past outcomes, so combinators may
    /// skip feeding it.
    fn ignores_history(&self) -> bool {
        false
    }

    /// Step at which an attached stopping rule fired, if any.
    fn stopped_at(&self) -> Option<u64> {
        None
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict(&self) -> Prediction {
        (**self).predict()
    }
    fn observe(&mut self, outcome: &Outcome, revealed_loss: Option<bool>) {
        (**self).observe(outcome, revealed_loss)
    }
    fn requires_supervision(&self) -> bool {
        (**self).requires_supervision()
    }
    fn ignores_history(&self) -> bool {
        (**self).ignores_history()
    }
    fn stopped_at(&self) -> Option<u64> {
        (**self).stopped_at()
    }
}

pub type PredictorFactory = Arc<dyn Fn() -> Box<dyn Predictor> + Send + Sync>;

/// Per-step loss bits of one run. Step `n` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    losses: BitVec,
    seed: u64,
    stopped_at: Option<u64>,
}

impl Trajectory {
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I, seed: u64) -> Self {
        Self {
            losses: bits.into_iter().collect(),
            seed,
            stopped_at: None,
        }
    }

    /// Parses `"10100"`-style strings; anything but `'1'` is a zero.
    pub fn from_str_bits(bits: &str) -> Self {
        Self::from_bits(bits.chars().map(|c| c == '1'), 0)
    }

    pub fn horizon(&self) -> u64 {
        self.losses.len() as u64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stopped_at(&self) -> Option<u64> {
        self.stopped_at
    }

    pub fn loss_at(&self, step: u64) -> bool {
        self.losses[(step - 1) as usize]
    }

    pub fn losses(&self) -> impl Iterator<Item = bool> + '_ {
        self.losses.iter().by_vals()
    }

    /// Largest step with loss 1.
    pub fn last_error_time(&self) -> Option<u64> {
        self.losses.last_one().map(|i| i as u64 + 1)
    }

    /// Number of losses at steps `>= from_step`; `from_step` ranges over
    /// `1..=horizon + 1`.
    pub fn cumulative_loss(&self, from_step: u64) -> Result<u64> {
        if from_step < 1 || from_step > self.horizon() + 1 {
            return Err(Error::Precondition(format!(
                "from_step {from_step} outside 1..={}",
                self.horizon() + 1
            )));
        }
        Ok(self.losses[(from_step - 1) as usize..].count_ones() as u64)
    }

    pub fn total_loss(&self) -> u64 {
        self.losses.count_ones() as u64
    }
}

/// Plays the game against an explicit outcome stream.
pub fn play<I>(
    attributes: &ModelAttributes,
    outcomes: I,
    predictor: &mut dyn Predictor,
    loss: &LossEvaluator,
    horizon: u64,
    seed: u64,
) -> Result<Trajectory>
where
    I: IntoIterator<Item = Outcome>,
{
    play_inner(attributes, outcomes, predictor, loss, horizon, seed, false)
}

fn play_inner<I>(
    attributes: &ModelAttributes,
    outcomes: I,
    predictor: &mut dyn Predictor,
    loss: &LossEvaluator,
    horizon: u64,
    seed: u64,
    stop_early: bool,
) -> Result<Trajectory>
where
    I: IntoIterator<Item = Outcome>,
{
    if horizon < 1 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let supervised = loss.kind() == LossKind::Supervised;
    if predictor.requires_supervision() && !supervised {
        return Err(Error::Config(format!(
            "predictor needs revealed losses but `{}` is unsupervised",
            loss.name()
        )));
    }
    loss.check_attributes(attributes)?;

    let mut losses = BitVec::with_capacity(if stop_early { 1024 } else { horizon as usize });
    let mut outcomes = outcomes.into_iter();
    for _ in 0..horizon {
        let stopped = stop_early && predictor.stopped_at().is_some();
        let prediction = predictor.predict();
        let Some(outcome) = outcomes.next() else {
            return Err(Error::Precondition("outcome stream ended before the horizon".into()));
        };
        let bit = loss.eval(attributes, &outcome, &prediction)?;
        predictor.observe(&outcome, supervised.then_some(bit));
        losses.push(bit);
        if stopped {
            break;
        }
    }
    Ok(Trajectory {
        losses,
        seed,
        stopped_at: predictor.stopped_at(),
    })
}

/// Runs `horizon` rounds with nature sampling from `model` under `seed`.
pub fn run_trajectory(
    model: &ModelSpec,
    predictor: &mut dyn Predictor,
    loss: &LossEvaluator,
    horizon: u64,
    seed: u64,
) -> Result<Trajectory> {
    let stream = model.sample_stream(seed)?;
    play(model.attributes(), stream, predictor, loss, horizon, seed)
}

/// Like [`run_trajectory`], but once the predictor's stopping rule has fired
/// it plays one more step, scoring the post-stop prediction, and ends. The
/// trajectory is shorter than `horizon` when that happens.
pub fn run_until_stopped(
    model: &ModelSpec,
    predictor: &mut dyn Predictor,
    loss: &LossEvaluator,
    horizon: u64,
    seed: u64,
) -> Result<Trajectory> {
    let stream = model.sample_stream(seed)?;
    play_inner(model.attributes(), stream, predictor, loss, horizon, seed, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;
    use crate::predictors::simple::Constant;

    fn bern_half() -> ModelSpec {
        ModelSpec::bernoulli(0.5, true).unwrap()
    }

    #[test]
    fn constant_correct_is_loss_free() {
        let mut p = Constant::new(Prediction::Binary(true));
        let t = run_trajectory(&bern_half(), &mut p, &losses::rationality(), 100, 1).unwrap();
        assert_eq!(t.total_loss(), 0);
        assert_eq!(t.last_error_time(), None);
    }

    #[test]
    fn constant_wrong_errs_every_step() {
        let mut p = Constant::new(Prediction::Binary(false));
        let t = run_trajectory(&bern_half(), &mut p, &losses::rationality(), 5, 1).unwrap();
        assert_eq!(
            t.losses().map(|b| if b { '1' } else { '0' }).collect::<String>(),
            "11111"
        );
        assert_eq!(t.cumulative_loss(1).unwrap(), 5);
    }

    #[test]
    fn same_seed_same_trajectory() {
        use crate::predictors::simple::LastObservation;
        let model = ModelSpec::bernoulli(0.5, true)
            .unwrap()
            .with_attributes(ModelAttributes::default().with_property("one", true));
        let run = || {
            let mut p = LastObservation::default();
            run_trajectory(&model, &mut p, &losses::property_bit("one"), 500, 42).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.total_loss() > 0);
    }

    #[test]
    fn last_error_and_cumulative() {
        let t = Trajectory::from_str_bits("10100");
        assert_eq!(t.last_error_time(), Some(3));
        assert_eq!(t.cumulative_loss(1).unwrap(), 2);
        assert_eq!(t.cumulative_loss(4).unwrap(), 0);
        assert_eq!(Trajectory::from_str_bits("00000").last_error_time(), None);
        assert_eq!(Trajectory::from_str_bits("00001").last_error_time(), Some(5));
        assert_eq!(Trajectory::from_str_bits("11111").cumulative_loss(3).unwrap(), 3);
        assert_eq!(t.cumulative_loss(6).unwrap(), 0);
        assert!(t.cumulative_loss(0).is_err());
        assert!(t.cumulative_loss(7).is_err());
    }

    #[test]
    fn incompatible_prediction_is_typed_error() {
        let mut p = Constant::new(Prediction::Natural(3));
        let err = run_trajectory(&bern_half(), &mut p, &losses::rationality(), 10, 1).unwrap_err();
        assert!(matches!(err, Error::IncompatiblePrediction { .. }));
    }

    #[test]
    fn missing_attribute_rejected_up_front() {
        let model = ModelSpec::bernoulli(0.5, true).unwrap();
        let mut p = Constant::new(Prediction::Real(0.5));
        let err = run_trajectory(&model, &mut p, &losses::stationary_within(0.1), 10, 1);
        assert!(matches!(err, Err(Error::MissingAttribute { .. })));
    }

    #[test]
    fn zero_horizon_rejected() {
        let mut p = Constant::new(Prediction::Binary(true));
        assert!(matches!(
            run_trajectory(&bern_half(), &mut p, &losses::rationality(), 0, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn distribution_prediction_validated() {
        assert!(Prediction::distribution(vec![0.5, 0.5]).is_ok());
        assert!(Prediction::distribution(vec![0.5, 0.6]).is_err());
        assert!(Prediction::distribution(vec![1.5, -0.5]).is_err());
    }
}
