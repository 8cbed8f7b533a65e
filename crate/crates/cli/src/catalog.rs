//! Identifiers a config may name, and their builders.

use std::sync::Arc;

use easp_core::combinators::BoostMajority;
use easp_core::game::LossEvaluator;
use easp_core::models::{distribution_with_entropy, tight_class_schedule, ModelKind, ModelSpec};
use easp_core::predictors::cover::cover_predictor;
use easp_core::predictors::entropy::EntropyLePredictor;
use easp_core::predictors::functional::MatrixProperty;
use easp_core::predictors::insurance::{InsurancePredictor, QuantileSchedule};
use easp_core::predictors::markov::{MatrixStationary, RegenerationEstimator};
use easp_core::predictors::mean_set::{MeanSetClassifier, MeanSets, MomentClassSpec};
use easp_core::predictors::simple::{Constant, LastObservation};
use easp_core::predictors::slln::SllnPredictor;
use easp_core::predictors::threshold::{rational_threshold_online, FixedThreshold};
use easp_core::{losses, Prediction, Predictor, PredictorFactory};

use crate::config::{Config, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Predictor,
    Model,
    Loss,
}

impl Category {
    pub fn label(self) -> &'static str {
        match self {
            Category::Predictor => "predictor",
            Category::Model => "model",
            Category::Loss => "loss",
        }
    }
}

pub struct CatalogEntry {
    pub category: Category,
    pub id: &'static str,
    pub params: &'static str,
    pub note: &'static str,
}

const fn entry(category: Category, id: &'static str, params: &'static str, note: &'static str) -> CatalogEntry {
    CatalogEntry {
        category,
        id,
        params,
        note,
    }
}

use Category::{Loss, Model, Predictor as Pred};

pub const CATALOG: &[CatalogEntry] = &[
    entry(Pred, "constant", "value", "fixed binary answer; baseline"),
    entry(Pred, "last_observation", "", "echoes the last bit; weak learner"),
    entry(
        Pred,
        "cover_predictor",
        "tight_variance",
        "rationality of a Bernoulli mean, staged covers glued by nested union",
    ),
    entry(
        Pred,
        "slln_mean",
        "truncation",
        "explicit truncated-mean estimator at checkpoints m^4 2^m",
    ),
    entry(
        Pred,
        "entropy_at_most",
        "threshold",
        "is the entropy at most a threshold; box-minimised plug-in",
    ),
    entry(
        Pred,
        "mean_set_classifier",
        "p_moment, a, b",
        "nearer of two separated mean sets",
    ),
    entry(
        Pred,
        "matrix_property",
        "property, dim, margin_c",
        "comparison program on running means, doubling schedule",
    ),
    entry(
        Pred,
        "boost_majority",
        "weak",
        "majority over n blocks of n outcomes per stage",
    ),
    entry(
        Pred,
        "rational_threshold",
        "",
        "back-and-forth over rational thresholds",
    ),
    entry(Pred, "fixed_threshold", "value", "single threshold; control"),
    entry(
        Pred,
        "insurance",
        "schedule",
        "quotes the k-th tail quantile of a tight class",
    ),
    entry(
        Pred,
        "markov_matrix",
        "states",
        "stationary law by inverting the estimated generator",
    ),
    entry(
        Pred,
        "markov_regeneration",
        "states, epsilon, eta, c",
        "regeneration-cycle estimate with stopping rule",
    ),
    entry(Model, "bernoulli", "p, rational", "i.i.d. bits"),
    entry(
        Model,
        "categorical",
        "weights, offset",
        "finite law on offset, offset+1, ...",
    ),
    entry(Model, "geometric", "ratio", "P(X = j) = (1 - r) r^(j-1), j >= 1"),
    entry(Model, "heavy_tail", "exponent, cutoff", "power law j^-a on 1..cutoff"),
    entry(
        Model,
        "markov",
        "transition",
        "chain started from stationarity; rows split by ';'",
    ),
    entry(
        Model,
        "bernoulli_matrix",
        "dim, means",
        "independent Bernoulli matrix entries",
    ),
    entry(
        Model,
        "threshold",
        "a, rational",
        "labelled uniform points, label 1{x < a}",
    ),
    entry(
        Model,
        "entropy_param",
        "target_nats",
        "member of the entropy-indexed family",
    ),
    entry(
        Model,
        "noisy_class",
        "class, fidelity",
        "bits agreeing with a hidden class",
    ),
    entry(Loss, "rationality", "", "wrong rational/irrational label"),
    entry(Loss, "mean_within", "epsilon", "|y - mean| >= epsilon"),
    entry(Loss, "entropy_at_most", "threshold", "wrong answer to H <= threshold"),
    entry(Loss, "insurance", "", "outcome exceeds the quoted bound (supervised)"),
    entry(
        Loss,
        "threshold_label",
        "",
        "threshold misclassifies the point (supervised)",
    ),
    entry(
        Loss,
        "stationary_within",
        "epsilon",
        "sup-norm error of a stationary estimate exceeds epsilon",
    ),
    entry(Loss, "property_bit", "name", "wrong value of a named model property"),
    entry(Loss, "property_class", "name", "wrong class for a named model property"),
    entry(
        Loss,
        "matrix_property",
        "property, dim",
        "wrong bit for a property of the mean matrix",
    ),
];

fn core_err<'a>(cfg: &'a Config, key: &str) -> impl Fn(easp_core::Error) -> ConfigError + 'a {
    let key = key.to_string();
    move |e| cfg.error(&key, e.to_string())
}

fn parse_property(cfg: &Config, key: &str) -> Result<MatrixProperty, ConfigError> {
    let v: String = cfg.require(key)?;
    Ok(match v.as_str() {
        "singular" => MatrixProperty::Singular,
        "repeated_eigenvalue" => MatrixProperty::RepeatedEigenvalue,
        "spectrum_equal" => MatrixProperty::SpectrumEqual,
        other => match other.strip_prefix("rank_").and_then(|r| r.parse().ok()) {
            Some(r) => MatrixProperty::RankEquals(r),
            None => return Err(cfg.error(
                key,
                format!(
                    "unknown property `{other}`; expected singular, rank_<r>, repeated_eigenvalue or spectrum_equal"
                ),
            )),
        },
    })
}

/// Builds model `id` from the keys under `prefix`.
pub fn build_model(cfg: &Config, prefix: &str) -> Result<ModelSpec, ConfigError> {
    let key = |field: &str| format!("{prefix}{field}");
    let kind_key = key("kind");
    let kind: String = cfg.require(&kind_key)?;
    let spec = match kind.as_str() {
        "bernoulli" => ModelSpec::bernoulli(cfg.require(&key("p"))?, cfg.require(&key("rational"))?),
        "categorical" => {
            let weights = cfg
                .list(&key("weights"))?
                .ok_or_else(|| cfg.error(&key("weights"), "required key is missing"))?;
            ModelSpec::new(ModelKind::Categorical {
                weights,
                offset: cfg.get_or(&key("offset"), 0)?,
            })
        }
        "geometric" => ModelSpec::geometric(cfg.require(&key("ratio"))?),
        "heavy_tail" => ModelSpec::new(ModelKind::HeavyTail {
            exponent: cfg.get_or(&key("exponent"), 2.5)?,
            cutoff: cfg.get_or(&key("cutoff"), 1_000_000)?,
        }),
        "markov" => {
            let t = cfg
                .matrix(&key("transition"))?
                .ok_or_else(|| cfg.error(&key("transition"), "required key is missing"))?;
            ModelSpec::markov(t)
        }
        "bernoulli_matrix" => {
            let means = cfg
                .list(&key("means"))?
                .ok_or_else(|| cfg.error(&key("means"), "required key is missing"))?;
            ModelSpec::bernoulli_matrix(cfg.require(&key("dim"))?, means)
        }
        "threshold" => ModelSpec::threshold(cfg.require(&key("a"))?, cfg.require(&key("rational"))?),
        "entropy_param" => distribution_with_entropy(cfg.require(&key("target_nats"))?),
        "noisy_class" => ModelSpec::noisy_class(cfg.require(&key("class"))?, cfg.get_or(&key("fidelity"), 0.6)?),
        other => return Err(cfg.error(&kind_key, format!("unknown model kind `{other}`"))),
    };
    let mut spec = spec.map_err(core_err(cfg, &kind_key))?;
    let prop_prefix = key("property.");
    let props: Vec<String> = cfg.keys_with_prefix(&prop_prefix).map(str::to_string).collect();
    for k in props {
        let bit: bool = cfg.require(&k)?;
        spec = spec.with_property(&k[prop_prefix.len()..], bit);
    }
    Ok(spec)
}

fn factory<P, F>(f: F) -> PredictorFactory
where
    P: Predictor + 'static,
    F: Fn() -> P + Send + Sync + 'static,
{
    Arc::new(move || Box::new(f()) as Box<dyn Predictor>)
}

/// `models` feeds class-aware schedules (insurance).
pub fn build_predictor(cfg: &Config, models: &[ModelSpec]) -> Result<PredictorFactory, ConfigError> {
    let id: String = cfg.require("predictor")?;
    let p = |field: &str| format!("predictor.{field}");
    Ok(match id.as_str() {
        "constant" => {
            let v: bool = cfg.require(&p("value"))?;
            factory(move || Constant::new(Prediction::Binary(v)))
        }
        "last_observation" => factory(LastObservation::default),
        "cover_predictor" => {
            let tight: bool = cfg.get_or(&p("tight_variance"), false)?;
            cover_predictor(tight).map_err(core_err(cfg, "predictor"))?;
            factory(move || cover_predictor(tight).unwrap())
        }
        "slln_mean" => match cfg.get::<f64>(&p("truncation"))? {
            Some(level) => factory(move || SllnPredictor::with_truncation(level)),
            None => factory(SllnPredictor::new),
        },
        "entropy_at_most" => {
            let t: f64 = cfg.require(&p("threshold"))?;
            EntropyLePredictor::new(t).map_err(core_err(cfg, &p("threshold")))?;
            factory(move || EntropyLePredictor::new(t).unwrap())
        }
        "mean_set_classifier" => {
            let p_moment: f64 = cfg.get_or(&p("p_moment"), 2.0)?;
            let points = |k: &str| -> Result<Vec<Vec<f64>>, ConfigError> {
                Ok(cfg
                    .list::<f64>(k)?
                    .ok_or_else(|| cfg.error(k, "required key is missing"))?
                    .into_iter()
                    .map(|x| vec![x])
                    .collect())
            };
            let (a, b) = (points(&p("a"))?, points(&p("b"))?);
            let spec = MomentClassSpec {
                p_moment,
                levels: Arc::new(move |_| MeanSets {
                    a: a.clone(),
                    b: b.clone(),
                }),
            };
            MeanSetClassifier::new(spec.clone()).map_err(core_err(cfg, "predictor"))?;
            factory(move || MeanSetClassifier::new(spec.clone()).unwrap())
        }
        "matrix_property" => {
            let property = parse_property(cfg, &p("property"))?;
            let dim: usize = cfg.require(&p("dim"))?;
            let c: f64 = cfg.get_or(&p("margin_c"), 1.0)?;
            factory(move || property.predictor(dim, c))
        }
        "boost_majority" => {
            let weak: String = cfg.get_or(&p("weak"), "last_observation".to_string())?;
            if weak != "last_observation" {
                return Err(cfg.error(&p("weak"), format!("unsupported weak learner `{weak}`")));
            }
            let weak = factory(LastObservation::default);
            factory(move || BoostMajority::new(weak.clone()))
        }
        "rational_threshold" => factory(rational_threshold_online),
        "fixed_threshold" => {
            let v: f64 = cfg.require(&p("value"))?;
            factory(move || FixedThreshold(v))
        }
        "insurance" => {
            let key = p("schedule");
            let schedule = match cfg.raw(&key) {
                None | Some("class") => tight_class_schedule(models).map_err(core_err(cfg, &key))?,
                Some(_) => {
                    let values = cfg.list::<u64>(&key)?.unwrap();
                    QuantileSchedule::explicit(values).map_err(core_err(cfg, &key))?
                }
            };
            factory(move || InsurancePredictor::new(schedule.clone()))
        }
        "markov_matrix" => {
            let states: usize = cfg.require(&p("states"))?;
            if states == 0 {
                return Err(cfg.error(&p("states"), "need at least one state"));
            }
            factory(move || MatrixStationary::new(states))
        }
        "markov_regeneration" => {
            let states: usize = cfg.require(&p("states"))?;
            let eps: f64 = cfg.get_or(&p("epsilon"), 0.1)?;
            let eta: f64 = cfg.get_or(&p("eta"), 0.05)?;
            let c: f64 = cfg.get_or(&p("c"), 8.0)?;
            RegenerationEstimator::new(states, eps, eta, c).map_err(core_err(cfg, "predictor"))?;
            factory(move || RegenerationEstimator::new(states, eps, eta, c).unwrap())
        }
        other => return Err(cfg.error("predictor", format!("unknown predictor `{other}`"))),
    })
}

/// Property-bit key holding the ground truth of a matrix property.
pub fn matrix_property_key(property: MatrixProperty) -> String {
    format!("matrix.{}", property.name())
}

/// Records the exact-mean truth of the configured matrix property on each
/// model so the loss reads a stored bit instead of recomputing it per step.
pub fn annotate_matrix_truth(cfg: &Config, models: &mut [ModelSpec]) -> Result<(), ConfigError> {
    if cfg.raw("loss") != Some("matrix_property") {
        return Ok(());
    }
    let property = parse_property(cfg, "loss.property")?;
    let dim: usize = cfg.require("loss.dim")?;
    for m in models.iter_mut() {
        let means = match m.attributes().mean.as_ref() {
            Some(means) if means.len() >= dim * dim => means.clone(),
            _ => return Err(cfg.error("loss", format!("{} has no {dim}x{dim} mean matrix", m.name()))),
        };
        if property == MatrixProperty::SpectrumEqual && means.len() < 2 * dim * dim {
            return Err(cfg.error("loss.property", "spectrum_equal needs two matrices per model"));
        }
        *m = m
            .clone()
            .with_property(&matrix_property_key(property), property.truth(dim, &means));
    }
    Ok(())
}

pub fn build_loss(cfg: &Config) -> Result<LossEvaluator, ConfigError> {
    let id: String = cfg.require("loss")?;
    let p = |field: &str| format!("loss.{field}");
    Ok(match id.as_str() {
        "rationality" => losses::rationality(),
        "mean_within" => losses::mean_within(cfg.require(&p("epsilon"))?),
        "entropy_at_most" => losses::entropy_at_most(cfg.require(&p("threshold"))?),
        "insurance" => losses::insurance(),
        "threshold_label" => losses::threshold_label(),
        "stationary_within" => losses::stationary_within(cfg.require(&p("epsilon"))?),
        "property_bit" => losses::property_bit(&cfg.require::<String>(&p("name"))?),
        "property_class" => losses::property_class(&cfg.require::<String>(&p("name"))?),
        "matrix_property" => {
            let _: usize = cfg.require(&p("dim"))?;
            losses::property_bit(&matrix_property_key(parse_property(cfg, &p("property"))?))
        }
        other => return Err(cfg.error("loss", format!("unknown loss `{other}`"))),
    })
}
