//! Seeded sample-stream generators with their ground-truth attributes.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{config, Error, Result};
use crate::game::{ModelAttributes, Outcome};
use crate::predictors::insurance::QuantileSchedule;
use crate::predictors::markov::stationary_from_transition;
use crate::rng::SplitMix64;

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Bernoulli {
        p: f64,
        rational: bool,
    },
    /// Weights over `offset, offset + 1, ...`.
    Categorical {
        weights: Vec<f64>,
        offset: u64,
    },
    /// `p(X = j) = (1 - ratio) ratio^(j-1)` for `j >= 1`.
    Geometric {
        ratio: f64,
    },
    /// `p(X = j) ∝ j^(-exponent)` on `1..=cutoff`.
    HeavyTail {
        exponent: f64,
        cutoff: u64,
    },
    /// Row-stochastic transition matrix; the chain starts from stationarity.
    Markov {
        transition: Vec<Vec<f64>>,
    },
    /// Independent Bernoulli entries; `means` holds one or more row-major
    /// `dim x dim` mean matrices back to back.
    BernoulliMatrix {
        dim: usize,
        means: Vec<f64>,
    },
    /// Online game: `x ~ Uniform[0,1)` labelled `1{x < a}`.
    Threshold {
        a: f64,
        rational: bool,
    },
    /// `(1 - epsilon) Uniform{0..k-2} + epsilon δ_{k-1}`.
    EntropyParam {
        target_nats: f64,
        k: usize,
        epsilon: f64,
    },
    /// Bits equal to `class` with probability `fidelity`.
    NoisyClass {
        class: bool,
        fidelity: f64,
    },
}

#[derive(Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    attributes: ModelAttributes,
    // Cumulative distribution for discrete kinds with large supports.
    cdf: Option<Arc<Vec<f64>>>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("kind", &self.kind)
            .field("attributes", &self.attributes)
            .finish()
    }
}

/// `h(x) = -x ln x` with `h(0) = 0`.
#[inline]
pub fn h(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

pub fn entropy_nats(weights: &[f64]) -> f64 {
    weights.iter().map(|&w| h(w)).sum()
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return config(format!("{name} = {p} is not a probability"));
    }
    Ok(())
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return config("empty weight vector");
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return config(format!("weights must be finite and nonnegative: {weights:?}"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return config(format!("weights sum to {total}, not 1"));
    }
    Ok(())
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Index of the first cumulative weight exceeding `u`; clamps to the last.
#[inline]
fn invert(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

impl ModelSpec {
    /// Validates `kind` and derives its attributes.
    pub fn new(kind: ModelKind) -> Result<Self> {
        let mut attributes = ModelAttributes::default();
        let mut cdf = None;
        match &kind {
            ModelKind::Bernoulli { p, rational } => {
                check_prob("p", *p)?;
                attributes.mean = Some(vec![*p]);
                attributes.is_rational = Some(*rational);
                attributes.entropy_nats = Some(h(*p) + h(1.0 - p));
            }
            ModelKind::Categorical { weights, offset } => {
                check_weights(weights)?;
                let mean = weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (*offset + i as u64) as f64 * w)
                    .sum();
                attributes.mean = Some(vec![mean]);
                attributes.entropy_nats = Some(entropy_nats(weights));
            }
            ModelKind::Geometric { ratio } => {
                if !(0.0..1.0).contains(ratio) {
                    return config(format!("geometric ratio {ratio} must lie in [0, 1)"));
                }
                let r = *ratio;
                attributes.mean = Some(vec![1.0 / (1.0 - r)]);
                attributes.entropy_nats = Some((h(1.0 - r) + h(r)) / (1.0 - r));
            }
            ModelKind::HeavyTail { exponent, cutoff } => {
                if *exponent <= 2.0 || *cutoff < 1 {
                    return config(format!(
                        "heavy tail needs exponent > 2 and cutoff >= 1 (got {exponent}, {cutoff})"
                    ));
                }
                let raw: Vec<f64> = (1..=*cutoff).map(|j| (j as f64).powf(-exponent)).collect();
                let z: f64 = raw.iter().sum();
                let weights: Vec<f64> = raw.iter().map(|w| w / z).collect();
                let mean = weights.iter().enumerate().map(|(i, w)| (i + 1) as f64 * w).sum();
                attributes.mean = Some(vec![mean]);
                attributes.entropy_nats = Some(entropy_nats(&weights));
                cdf = Some(Arc::new(cumulative(&weights)));
            }
            ModelKind::Markov { transition } => {
                let n = transition.len();
                if n == 0 || transition.iter().any(|row| row.len() != n) {
                    return config("transition matrix must be square and nonempty");
                }
                for row in transition {
                    check_weights(row)?;
                }
                let pi = stationary_from_transition(transition)
                    .map_err(|e| Error::Config(format!("markov chain has no unique stationary law: {e}")))?;
                attributes.stationary = Some(pi);
            }
            ModelKind::BernoulliMatrix { dim, means } => {
                if *dim == 0 || means.is_empty() || means.len() % (dim * dim) != 0 {
                    return config(format!(
                        "bernoulli matrix: {} entries is not a positive multiple of {dim}x{dim}",
                        means.len()
                    ));
                }
                for &m in means {
                    check_prob("matrix entry", m)?;
                }
                attributes.mean = Some(means.clone());
            }
            ModelKind::Threshold { a, rational } => {
                check_prob("threshold", *a)?;
                attributes.is_rational = Some(*rational);
                attributes.mean = Some(vec![*a]);
            }
            ModelKind::EntropyParam { target_nats, .. } => {
                let weights = kind_weights(&kind).unwrap();
                check_weights(&weights)?;
                attributes.entropy_nats = Some(*target_nats);
                attributes.mean = Some(vec![weights.iter().enumerate().map(|(i, w)| i as f64 * w).sum()]);
            }
            ModelKind::NoisyClass { class, fidelity } => {
                check_prob("fidelity", *fidelity)?;
                attributes.property_bits.insert("class".into(), *class);
            }
        }
        Ok(Self { kind, attributes, cdf })
    }

    pub fn bernoulli(p: f64, rational: bool) -> Result<Self> {
        Self::new(ModelKind::Bernoulli { p, rational })
    }

    pub fn categorical(weights: Vec<f64>) -> Result<Self> {
        Self::new(ModelKind::Categorical { weights, offset: 0 })
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        Self::new(ModelKind::Geometric { ratio })
    }

    /// Finite-mean power law `j^(-2.5)` truncated at `10^6`.
    pub fn heavy_tail() -> Result<Self> {
        Self::new(ModelKind::HeavyTail {
            exponent: 2.5,
            cutoff: 1_000_000,
        })
    }

    pub fn markov(transition: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(ModelKind::Markov { transition })
    }

    pub fn bernoulli_matrix(dim: usize, means: Vec<f64>) -> Result<Self> {
        Self::new(ModelKind::BernoulliMatrix { dim, means })
    }

    pub fn threshold(a: f64, rational: bool) -> Result<Self> {
        Self::new(ModelKind::Threshold { a, rational })
    }

    pub fn noisy_class(class: bool, fidelity: f64) -> Result<Self> {
        Self::new(ModelKind::NoisyClass { class, fidelity })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn attributes(&self) -> &ModelAttributes {
        &self.attributes
    }

    /// Replaces the property bits and any other attribute the caller sets;
    /// kind-derived attributes the caller leaves `None` are kept.
    pub fn with_attributes(mut self, extra: ModelAttributes) -> Self {
        let a = &mut self.attributes;
        a.mean = extra.mean.or(a.mean.take());
        a.entropy_nats = extra.entropy_nats.or(a.entropy_nats);
        a.is_rational = extra.is_rational.or(a.is_rational);
        a.stationary = extra.stationary.or(a.stationary.take());
        a.property_bits.extend(extra.property_bits);
        self
    }

    pub fn with_property(mut self, name: &str, bit: bool) -> Self {
        self.attributes.property_bits.insert(name.to_string(), bit);
        self
    }

    /// Probability mass at `x` for models over the naturals.
    pub fn pmf(&self, x: u64) -> Result<f64> {
        Ok(match &self.kind {
            ModelKind::Geometric { ratio } => {
                if x == 0 {
                    0.0
                } else {
                    (1.0 - ratio) * ratio.powf((x - 1) as f64)
                }
            }
            ModelKind::HeavyTail { cutoff, .. } => {
                if x == 0 || x > *cutoff {
                    0.0
                } else {
                    let cdf = self.cdf.as_ref().unwrap();
                    let i = (x - 1) as usize;
                    cdf[i] - if i == 0 { 0.0 } else { cdf[i - 1] }
                }
            }
            kind => {
                let (weights, offset) = discrete_support(kind)
                    .ok_or_else(|| Error::Config(format!("{} is not a distribution over the naturals", self.name())))?;
                if x < offset {
                    0.0
                } else {
                    weights.get((x - offset) as usize).copied().unwrap_or(0.0)
                }
            }
        })
    }

    /// `P(X >= n)` for models over the naturals.
    pub fn tail_at_least(&self, n: u64) -> Result<f64> {
        Ok(match &self.kind {
            ModelKind::Geometric { ratio } => {
                if n <= 1 {
                    1.0
                } else {
                    ratio.powf((n - 1) as f64)
                }
            }
            ModelKind::HeavyTail { cutoff, .. } => {
                if n <= 1 {
                    1.0
                } else if n > *cutoff {
                    0.0
                } else {
                    (1.0 - self.cdf.as_ref().unwrap()[(n - 2) as usize]).max(0.0)
                }
            }
            kind => {
                let (weights, offset) = discrete_support(kind)
                    .ok_or_else(|| Error::Config(format!("{} is not a distribution over the naturals", self.name())))?;
                let start = n.saturating_sub(offset) as usize;
                weights.iter().skip(start).sum::<f64>().max(0.0)
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Bernoulli { .. } => "bernoulli",
            ModelKind::Categorical { .. } => "categorical",
            ModelKind::Geometric { .. } => "geometric",
            ModelKind::HeavyTail { .. } => "heavy_tail",
            ModelKind::Markov { .. } => "markov",
            ModelKind::BernoulliMatrix { .. } => "bernoulli_matrix",
            ModelKind::Threshold { .. } => "threshold",
            ModelKind::EntropyParam { .. } => "entropy_param",
            ModelKind::NoisyClass { .. } => "noisy_class",
        }
    }

    /// Outcome iterator reproducible from `seed`.
    pub fn sample_stream(&self, seed: u64) -> Result<Sampler> {
        let mut rng = SplitMix64::new(seed);
        let state = match &self.kind {
            ModelKind::Bernoulli { p, .. } => SamplerState::Bernoulli(*p),
            ModelKind::Categorical { weights, offset } => SamplerState::Discrete {
                cdf: Arc::new(cumulative(weights)),
                offset: *offset,
            },
            ModelKind::EntropyParam { .. } => SamplerState::Discrete {
                cdf: Arc::new(cumulative(&kind_weights(&self.kind).unwrap())),
                offset: 0,
            },
            ModelKind::HeavyTail { .. } => SamplerState::Discrete {
                cdf: Arc::clone(self.cdf.as_ref().unwrap()),
                offset: 1,
            },
            ModelKind::Geometric { ratio } => SamplerState::Geometric(*ratio),
            ModelKind::Markov { transition } => {
                let rows: Vec<Vec<f64>> = transition.iter().map(|r| cumulative(r)).collect();
                let pi = self.attributes.stationary.as_ref().unwrap();
                let first = invert(&cumulative(pi), rng.next_f64());
                SamplerState::Markov { rows, next: first }
            }
            ModelKind::BernoulliMatrix { means, .. } => SamplerState::Matrix(means.clone()),
            ModelKind::Threshold { a, .. } => SamplerState::Threshold(*a),
            ModelKind::NoisyClass { class, fidelity } => SamplerState::Noisy(*class, *fidelity),
        };
        Ok(Sampler { rng, state })
    }
}

fn kind_weights(kind: &ModelKind) -> Option<Vec<f64>> {
    match kind {
        ModelKind::EntropyParam { k, epsilon, .. } => Some(entropy_family_weights(*k, *epsilon)),
        _ => None,
    }
}

fn discrete_support(kind: &ModelKind) -> Option<(Vec<f64>, u64)> {
    match kind {
        ModelKind::Bernoulli { p, .. } => Some((vec![1.0 - p, *p], 0)),
        ModelKind::Categorical { weights, offset } => Some((weights.clone(), *offset)),
        ModelKind::EntropyParam { .. } => kind_weights(kind).map(|w| (w, 0)),
        ModelKind::NoisyClass { class, fidelity } => {
            let p_one = if *class { *fidelity } else { 1.0 - fidelity };
            Some((vec![1.0 - p_one, p_one], 0))
        }
        _ => None,
    }
}

enum SamplerState {
    Bernoulli(f64),
    Discrete { cdf: Arc<Vec<f64>>, offset: u64 },
    Geometric(f64),
    Markov { rows: Vec<Vec<f64>>, next: usize },
    Matrix(Vec<f64>),
    Threshold(f64),
    Noisy(bool, f64),
}

/// Infinite outcome stream of a [`ModelSpec`].
pub struct Sampler {
    rng: SplitMix64,
    state: SamplerState,
}

impl Iterator for Sampler {
    type Item = Outcome;

    fn next(&mut self) -> Option<Outcome> {
        let rng = &mut self.rng;
        Some(match &mut self.state {
            SamplerState::Bernoulli(p) => Outcome::Nat(u64::from(rng.bernoulli(*p))),
            SamplerState::Discrete { cdf, offset } => Outcome::Nat(*offset + invert(cdf, rng.next_f64()) as u64),
            SamplerState::Geometric(r) => {
                if *r == 0.0 {
                    Outcome::Nat(1)
                } else {
                    let u = 1.0 - rng.next_f64();
                    Outcome::Nat(1 + (u.ln() / r.ln()).floor() as u64)
                }
            }
            SamplerState::Markov { rows, next } => {
                let current = *next;
                *next = invert(&rows[current], rng.next_f64());
                Outcome::Nat(current as u64)
            }
            SamplerState::Matrix(means) => Outcome::Vector(
                means
                    .iter()
                    .map(|&m| if rng.bernoulli(m) { 1.0 } else { 0.0 })
                    .collect(),
            ),
            SamplerState::Threshold(a) => {
                let x = rng.next_f64();
                Outcome::Labeled { x, label: x < *a }
            }
            SamplerState::Noisy(class, fidelity) => {
                let agree = rng.bernoulli(*fidelity);
                Outcome::Nat(u64::from(agree == *class))
            }
        })
    }
}

/// Weights of `(1 - eps) Uniform{0..k-2} + eps δ_{k-1}`.
pub fn entropy_family_weights(k: usize, eps: f64) -> Vec<f64> {
    let mut w = vec![(1.0 - eps) / (k - 1) as f64; k - 1];
    w.push(eps);
    w
}

/// Exact entropy of the family member, `(1 - eps) ln(k - 1) + h(eps) + h(1 - eps)`.
pub fn entropy_family_value(k: usize, eps: f64) -> f64 {
    (1.0 - eps) * ((k - 1) as f64).ln() + h(eps) + h(1.0 - eps)
}

/// Member of the entropy-indexed family with entropy `h_nats`.
///
/// Picks `k` with `ln(k-1) < h <= ln k` and bisects `eps ∈ (0, 1/k]`, on
/// which the exact entropy is increasing, to within 1e-12 nats.
pub fn distribution_with_entropy(h_nats: f64) -> Result<ModelSpec> {
    if !(h_nats > 0.0) || !h_nats.is_finite() {
        return config(format!("target entropy {h_nats} must be positive and finite"));
    }
    let mut k = 2usize;
    while (k as f64).ln() < h_nats {
        k += 1;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0 / k as f64);
    if (entropy_family_value(k, hi) - h_nats).abs() > 1e-12 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if entropy_family_value(k, mid) < h_nats {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
    }
    let epsilon = hi;
    ModelSpec::new(ModelKind::EntropyParam {
        target_nats: h_nats,
        k,
        epsilon,
    })
}

/// Quantile schedule `n_k = min{n : max_p P(X >= n) <= 2^-k}` of a finite
/// family of distributions over the naturals.
pub fn tight_class_schedule(family: &[ModelSpec]) -> Result<QuantileSchedule> {
    if family.is_empty() {
        return config("empty family");
    }
    for spec in family {
        spec.tail_at_least(0)?;
        if spec.tail_at_least(1 << 62)? > 0.0 {
            return config(format!("{} has a non-vanishing tail", spec.name()));
        }
    }
    Ok(QuantileSchedule::from_family(family.to_vec()))
}
