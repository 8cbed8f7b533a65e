//! Seeded, parallel Monte Carlo runs of the prediction game.
//!
//! Desk-scale proxy for "finitely many errors almost surely": a trial is
//! settled when its last loss happens no later than the settle step, and the
//! empirical curve `P(error after n)` is reported on a log grid.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{run_trajectory, run_until_stopped, LossEvaluator, LossKind, PredictorFactory};
use crate::models::ModelSpec;

pub const SETTLE_PROXY: &str =
    "settled = no loss after the settle step; curve = fraction of trials with a loss at some step >= n";

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Thresholds {
    /// Defaults to half the horizon.
    pub settle_step: Option<u64>,
    pub min_settled_fraction: Option<f64>,
    pub min_stopped_fraction: Option<f64>,
    /// Fraction of trials whose last scored step had loss 0.
    pub min_final_correct_fraction: Option<f64>,
    /// Fraction of trials whose cumulative loss grows strictly between the
    /// first and last checkpoint.
    pub min_growing_fraction: Option<f64>,
}

impl Thresholds {
    fn validate(&self, horizon: u64) -> Result<()> {
        for (name, v) in [
            ("min_settled_fraction", self.min_settled_fraction),
            ("min_stopped_fraction", self.min_stopped_fraction),
            ("min_final_correct_fraction", self.min_final_correct_fraction),
            ("min_growing_fraction", self.min_growing_fraction),
        ] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("{name} = {v} is not a fraction")));
                }
            }
        }
        if let Some(s) = self.settle_step {
            if s > horizon {
                return Err(Error::Config(format!("settle_step {s} exceeds horizon {horizon}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WeightedModel {
    pub id: String,
    pub model: ModelSpec,
    pub weight: f64,
    /// Overrides the experiment-wide thresholds for this model.
    pub thresholds: Option<Thresholds>,
}

impl WeightedModel {
    pub fn new(id: &str, model: ModelSpec) -> Self {
        Self {
            id: id.to_string(),
            model,
            weight: 1.0,
            thresholds: None,
        }
    }

    pub fn with_thresholds(mut self, thresholds: Thresholds) -> Self {
        self.thresholds = Some(thresholds);
        self
    }
}

#[derive(Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub models: Vec<WeightedModel>,
    pub predictor: PredictorFactory,
    pub loss: LossEvaluator,
    pub horizon: u64,
    pub trials: u64,
    pub base_seed: u64,
    pub thresholds: Thresholds,
    /// Steps at which cumulative loss is recorded, ascending.
    pub checkpoints: Vec<u64>,
    /// End a trial one step after the predictor's stopping rule fires.
    pub stop_early: bool,
}

impl ExperimentConfig {
    pub fn new(name: &str, models: Vec<WeightedModel>, predictor: PredictorFactory, loss: LossEvaluator) -> Self {
        Self {
            name: name.to_string(),
            models,
            predictor,
            loss,
            horizon: 1000,
            trials: 100,
            base_seed: 0,
            thresholds: Thresholds::default(),
            checkpoints: Vec::new(),
            stop_early: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for m in &self.models {
            if !(m.weight > 0.0 && m.weight.is_finite()) {
                return Err(Error::Config(format!("model `{}` has weight {}", m.id, m.weight)));
            }
            if !ids.insert(&m.id) {
                return Err(Error::Config(format!("duplicate model id `{}`", m.id)));
            }
            if let Some(t) = &m.thresholds {
                t.validate(self.horizon)?;
            }
        }
        self.thresholds.validate(self.horizon)?;
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("checkpoints must be strictly increasing".into()));
        }
        if let Some(&c) = self.checkpoints.last() {
            if c > self.horizon || self.checkpoints[0] < 1 {
                return Err(Error::Config(format!("checkpoints must lie in 1..={}", self.horizon)));
            }
        }
        let probe = (self.predictor)();
        if probe.requires_supervision() && self.loss.kind() == LossKind::Unsupervised {
            return Err(Error::Config(format!(
                "predictor needs revealed losses but `{}` is unsupervised",
                self.loss.name()
            )));
        }
        let kind = probe.predict().kind();
        if kind != self.loss.accepts() {
            return Err(Error::Config(format!(
                "predictor emits {kind:?} but loss `{}` scores {:?}",
                self.loss.name(),
                self.loss.accepts()
            )));
        }
        for m in &self.models {
            self.loss.check_attributes(m.model.attributes())?;
        }
        Ok(())
    }

    /// Model index for each global trial index, by largest remainder.
    pub fn allocation(&self) -> Vec<usize> {
        let total: f64 = self.models.iter().map(|m| m.weight).sum();
        let quotas: Vec<f64> = self
            .models
            .iter()
            .map(|m| self.trials as f64 * m.weight / total)
            .collect();
        let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
        let assigned: u64 = counts.iter().sum();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - quotas[a].floor();
            let fb = quotas[b] - quotas[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().take((self.trials - assigned) as usize) {
            counts[i] += 1;
        }
        counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: u64,
    pub model: String,
    pub seed: u64,
    pub steps: u64,
    pub last_error_time: Option<u64>,
    pub cumulative_loss: u64,
    pub stopped_at: Option<u64>,
    pub final_loss: bool,
    /// Cumulative loss over steps `1..=c` for each checkpoint `c`.
    pub checkpoint_losses: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: u64,
    pub p_error_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingStats {
    pub stopped: u64,
    pub mean: Option<f64>,
    pub median: Option<u64>,
    pub max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub trials: u64,
    pub settle_step: u64,
    pub settled_fraction: f64,
    pub stopped_fraction: f64,
    pub final_correct_fraction: f64,
    pub growing_fraction: Option<f64>,
    pub mean_cumulative_loss: f64,
    /// Nearest-rank quantiles of the last error time, 0 standing for none.
    pub last_error_quantiles: BTreeMap<String, u64>,
    pub stopping: StoppingStats,
    pub curve: Vec<CurvePoint>,
    pub pass: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub horizon: u64,
    pub trials: u64,
    pub base_seed: u64,
    pub proxy: String,
    pub checkpoints: Vec<u64>,
    pub curve: Vec<CurvePoint>,
    pub models: BTreeMap<String, ModelReport>,
    pub pass: bool,
    #[serde(skip)]
    pub trial_results: Vec<TrialResult>,
}

/// `1, 2, 5, 10, 20, 50, ...` below `horizon`, then `horizon`.
pub fn log_grid(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut scale = 1u64;
    'outer: loop {
        for m in [1u64, 2, 5] {
            let v = m.saturating_mul(scale);
            if v >= horizon {
                break 'outer;
            }
            out.push(v);
        }
        scale = scale.saturating_mul(10);
    }
    out.push(horizon);
    out
}

fn curve(results: &[&TrialResult], horizon: u64) -> Vec<CurvePoint> {
    let total = results.len().max(1) as f64;
    log_grid(horizon)
        .into_iter()
        .map(|n| CurvePoint {
            n,
            p_error_after: results
                .iter()
                .filter(|r| r.last_error_time.is_some_and(|t| t >= n))
                .count() as f64
                / total,
        })
        .collect()
}

fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn fraction(results: &[&TrialResult], pred: impl Fn(&TrialResult) -> bool) -> f64 {
    results.iter().filter(|r| pred(r)).count() as f64 / results.len().max(1) as f64
}

fn model_report(results: &[&TrialResult], horizon: u64, thresholds: &Thresholds) -> ModelReport {
    let settle_step = thresholds.settle_step.unwrap_or(horizon / 2);
    let settled_fraction = fraction(results, |r| r.last_error_time.is_none_or(|t| t <= settle_step));
    let stopped_fraction = fraction(results, |r| r.stopped_at.is_some());
    let final_correct_fraction = fraction(results, |r| !r.final_loss);
    let growing_fraction = results
        .first()
        .filter(|r| r.checkpoint_losses.len() >= 2)
        .map(|_| fraction(results, |r| r.checkpoint_losses.last() > r.checkpoint_losses.first()));
    let mean_cumulative_loss =
        results.iter().map(|r| r.cumulative_loss as f64).sum::<f64>() / results.len().max(1) as f64;

    let mut last: Vec<u64> = results.iter().map(|r| r.last_error_time.unwrap_or(0)).collect();
    last.sort_unstable();
    let mut last_error_quantiles = BTreeMap::new();
    for (name, q) in [("q50", 0.5), ("q90", 0.9), ("q95", 0.95), ("q99", 0.99), ("max", 1.0)] {
        last_error_quantiles.insert(name.to_string(), nearest_rank(&last, q));
    }

    let mut stops: Vec<u64> = results.iter().filter_map(|r| r.stopped_at).collect();
    stops.sort_unstable();
    let stopping = StoppingStats {
        stopped: stops.len() as u64,
        mean: (!stops.is_empty()).then(|| stops.iter().map(|&s| s as f64).sum::<f64>() / stops.len() as f64),
        median: (!stops.is_empty()).then(|| nearest_rank(&stops, 0.5)),
        max: stops.last().copied(),
    };

    let mut failures = Vec::new();
    let mut gate = |name: &str, got: Option<f64>, need: Option<f64>| {
        if let Some(need) = need {
            match got {
                Some(v) if v >= need => {}
                Some(v) => failures.push(format!("{name} {v:.4} < {need}")),
                None => failures.push(format!("{name} unavailable")),
            }
        }
    };
    gate(
        "settled_fraction",
        Some(settled_fraction),
        thresholds.min_settled_fraction,
    );
    gate(
        "stopped_fraction",
        Some(stopped_fraction),
        thresholds.min_stopped_fraction,
    );
    gate(
        "final_correct_fraction",
        Some(final_correct_fraction),
        thresholds.min_final_correct_fraction,
    );
    gate("growing_fraction", growing_fraction, thresholds.min_growing_fraction);

    ModelReport {
        trials: results.len() as u64,
        settle_step,
        settled_fraction,
        stopped_fraction,
        final_correct_fraction,
        growing_fraction,
        mean_cumulative_loss,
        last_error_quantiles,
        stopping,
        curve: curve(results, horizon),
        pass: failures.is_empty(),
        failures,
    }
}

fn run_trial(config: &ExperimentConfig, trial: u64, model: &WeightedModel) -> Result<TrialResult> {
    let seed = config.base_seed.wrapping_add(trial);
    let mut predictor = (config.predictor)();
    let t = if config.stop_early {
        run_until_stopped(&model.model, predictor.as_mut(), &config.loss, config.horizon, seed)?
    } else {
        run_trajectory(&model.model, predictor.as_mut(), &config.loss, config.horizon, seed)?
    };
    let steps = t.horizon();
    let total = t.total_loss();
    let checkpoint_losses = config
        .checkpoints
        .iter()
        .map(|&c| {
            let from = c.min(steps) + 1;
            total - t.cumulative_loss(from).unwrap()
        })
        .collect();
    Ok(TrialResult {
        trial,
        model: model.id.clone(),
        seed,
        steps,
        last_error_time: t.last_error_time(),
        cumulative_loss: total,
        stopped_at: t.stopped_at(),
        final_loss: t.loss_at(steps),
        checkpoint_losses,
    })
}

/// Runs every trial (in parallel on the current rayon pool) and aggregates
/// in trial order.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let allocation = config.allocation();
    let results: Vec<TrialResult> = allocation
        .par_iter()
        .enumerate()
        .map(|(trial, &m)| run_trial(config, trial as u64, &config.models[m]))
        .collect::<Result<_>>()?;

    let mut models = BTreeMap::new();
    let mut pass = true;
    for m in &config.models {
        let mine: Vec<&TrialResult> = results.iter().filter(|r| r.model == m.id).collect();
        let report = model_report(
            &mine,
            config.horizon,
            m.thresholds.as_ref().unwrap_or(&config.thresholds),
        );
        pass &= report.pass;
        models.insert(m.id.clone(), report);
    }
    let all: Vec<&TrialResult> = results.iter().collect();
    Ok(ExperimentReport {
        name: config.name.clone(),
        horizon: config.horizon,
        trials: config.trials,
        base_seed: config.base_seed,
        proxy: SETTLE_PROXY.to_string(),
        checkpoints: config.checkpoints.clone(),
        curve: curve(&all, config.horizon),
        models,
        pass,
        trial_results: results,
    })
}

/// Largest, over the listed models, empirical probability of a loss at some
/// step `>= n`.
pub fn estimate_eta_predictability(
    models: &[ModelSpec],
    predictor: PredictorFactory,
    loss: &LossEvaluator,
    n: u64,
    horizon: u64,
    trials: u64,
    base_seed: u64,
) -> Result<f64> {
    if n > horizon {
        return Err(Error::Precondition(format!("n = {n} exceeds horizon {horizon}")));
    }
    let weighted: Vec<WeightedModel> = models
        .iter()
        .enumerate()
        .map(|(i, m)| WeightedModel::new(&format!("m{i}"), m.clone()))
        .collect();
    let mut config = ExperimentConfig::new("eta", weighted, predictor, loss.clone());
    config.horizon = horizon;
    config.trials = trials * models.len() as u64;
    config.base_seed = base_seed;
    let report = run_monte_carlo(&config)?;
    let mut worst = 0.0f64;
    for m in report.models.keys() {
        let mine: Vec<&TrialResult> = report.trial_results.iter().filter(|r| &r.model == m).collect();
        worst = worst.max(fraction(&mine, |r| r.last_error_time.is_some_and(|t| t >= n)));
    }
    Ok(worst)
}

/// Checkpoints used by [`negative_demo`] when the config sets none.
pub const NEGATIVE_CHECKPOINTS: [u64; 2] = [1_000, 100_000];

/// Runs a class that is not e.a.s.-predictable and reports cumulative-loss
/// growth between the first and last checkpoint.
pub fn negative_demo(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut config = config.clone();
    if config.checkpoints.is_empty() {
        config.checkpoints = NEGATIVE_CHECKPOINTS
            .iter()
            .copied()
            .filter(|&c| c <= config.horizon)
            .collect();
    }
    if config.checkpoints.len() < 2 {
        return Err(Error::Config(
            "negative demo needs two checkpoints within the horizon".into(),
        ));
    }
    run_monte_carlo(&config)
}
