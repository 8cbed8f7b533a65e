//! Turns a parsed config into a harness experiment and writes its outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use easp_core::harness::{run_monte_carlo, ExperimentConfig, ExperimentReport, Thresholds, WeightedModel};
use serde::Serialize;

use crate::catalog::{annotate_matrix_truth, build_loss, build_model, build_predictor};
use crate::config::{Config, ConfigError};

const THRESHOLD_KEYS: [&str; 5] = [
    "settle_step",
    "min_settled_fraction",
    "min_stopped_fraction",
    "min_final_correct_fraction",
    "min_growing_fraction",
];

fn thresholds(cfg: &Config, prefix: &str) -> Result<Option<Thresholds>, ConfigError> {
    let k = |name: &str| format!("{prefix}{name}");
    if THRESHOLD_KEYS.iter().all(|name| cfg.raw(&k(name)).is_none()) {
        return Ok(None);
    }
    Ok(Some(Thresholds {
        settle_step: cfg.get(&k("settle_step"))?,
        min_settled_fraction: cfg.get(&k("min_settled_fraction"))?,
        min_stopped_fraction: cfg.get(&k("min_stopped_fraction"))?,
        min_final_correct_fraction: cfg.get(&k("min_final_correct_fraction"))?,
        min_growing_fraction: cfg.get(&k("min_growing_fraction"))?,
    }))
}

/// `model.kind = ...` declares a single model with id `model`; otherwise
/// every `model.<id>.kind` declares one.
fn model_prefixes(cfg: &Config) -> Vec<(String, String)> {
    if cfg.raw("model.kind").is_some() {
        return vec![("model".into(), "model.".into())];
    }
    cfg.keys_with_prefix("model.")
        .filter_map(|k| {
            let rest = k.strip_prefix("model.")?.strip_suffix(".kind")?;
            (!rest.contains('.')).then(|| (rest.to_string(), format!("model.{rest}.")))
        })
        .collect()
}

pub fn resolve(cfg: &Config, default_name: &str) -> Result<ExperimentConfig, ConfigError> {
    let base_seed: u64 = cfg.require("base_seed")?;
    let prefixes = model_prefixes(cfg);
    let mut specs = prefixes
        .iter()
        .map(|(_, prefix)| build_model(cfg, prefix))
        .collect::<Result<Vec<_>, _>>()?;
    annotate_matrix_truth(cfg, &mut specs)?;
    let mut models = Vec::new();
    for ((id, prefix), model) in prefixes.into_iter().zip(specs) {
        let weight: f64 = cfg.get_or(&format!("{prefix}weight"), 1.0)?;
        models.push(WeightedModel {
            id,
            model,
            weight,
            thresholds: thresholds(cfg, &prefix)?,
        });
    }
    if models.is_empty() {
        return Err(cfg.error(
            "model.kind",
            "no model declared (use `model.kind` or `model.<id>.kind`)",
        ));
    }
    let specs: Vec<_> = models.iter().map(|m| m.model.clone()).collect();
    let predictor = build_predictor(cfg, &specs)?;
    let loss = build_loss(cfg)?;
    let mut config = ExperimentConfig::new(&cfg.get_or("name", default_name.to_string())?, models, predictor, loss);
    config.base_seed = base_seed;
    config.trials = cfg.get_or("trials", config.trials)?;
    config.horizon = cfg.get_or("horizon", config.horizon)?;
    config.thresholds = thresholds(cfg, "")?.unwrap_or_default();
    config.checkpoints = cfg.list("checkpoints")?.unwrap_or_default();
    config.stop_early = cfg.get_or("stop_early", false)?;
    cfg.finish()?;
    config.validate().map_err(|e| ConfigError {
        path: cfg.path().to_string(),
        line: None,
        key: None,
        message: e.to_string(),
    })?;
    Ok(config)
}

pub fn trials_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("trial,seed,last_error_time,cumulative_loss,stopped_at\n");
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in &report.trial_results {
        writeln!(
            out,
            "{},{},{},{},{}",
            t.trial,
            t.seed,
            opt(t.last_error_time),
            t.cumulative_loss,
            opt(t.stopped_at)
        )
        .unwrap();
    }
    out
}

pub fn summary_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialises");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub easp_cli: &'static str,
    pub easp_core: &'static str,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_path: String,
    pub config_hash: String,
    pub canonical_config: String,
    pub trials_csv: String,
    pub summary_json: String,
    pub versions: Versions,
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

pub struct RunOutput {
    pub report: ExperimentReport,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub trials: Option<u64>,
    pub horizon: Option<u64>,
}

pub fn run_file(path: &Path, overrides: &Overrides, out_dir: &Path) -> Result<RunOutput, RunError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| RunError::Io(format!("{display}: {e}")))?;
    let mut cfg = Config::parse(&text, &display)?;
    if let Some(t) = overrides.trials {
        cfg.set("trials", &t.to_string());
    }
    if let Some(h) = overrides.horizon {
        cfg.set("horizon", &h.to_string());
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    let config = resolve(&cfg, stem)?;

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let report = run_monte_carlo(&config).map_err(|e| ConfigError {
        path: display.clone(),
        line: None,
        key: None,
        message: e.to_string(),
    })?;
    let wall_clock_seconds = clock.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(|e| RunError::Io(format!("{}: {e}", out_dir.display())))?;
    let write = |file: String, body: &str| -> Result<String, RunError> {
        let p = out_dir.join(file);
        fs::write(&p, body).map_err(|e| RunError::Io(format!("{}: {e}", p.display())))?;
        Ok(p.display().to_string())
    };
    let trials_csv = write(format!("{}_trials.csv", report.name), &trials_csv(&report))?;
    let summary_json = write(format!("{}_summary.json", report.name), &summary_json(&report))?;
    let manifest = RunManifest {
        config_path: display,
        config_hash: cfg.hash(),
        canonical_config: cfg.canonical(),
        trials_csv,
        summary_json,
        versions: Versions {
            easp_cli: env!("CARGO_PKG_VERSION"),
            easp_core: easp_core::VERSION,
        },
        threads: rayon::current_num_threads(),
        started_unix_seconds: started,
        wall_clock_seconds,
    };
    let manifest_file = format!("{}_manifest.json", report.name);
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    body.push('\n');
    write(manifest_file.clone(), &body)?;
    Ok(RunOutput {
        report,
        manifest,
        manifest_path: out_dir.join(manifest_file),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        Config::parse(text, "t.cfg").unwrap()
    }

    #[test]
    fn single_and_named_models() {
        let single = cfg("base_seed = 1\nmodel.kind = bernoulli\nmodel.p = 0.5\nmodel.rational = true\npredictor = constant\npredictor.value = true\nloss = rationality\n");
        let c = resolve(&single, "x").unwrap();
        assert_eq!(c.models.len(), 1);
        assert_eq!(c.models[0].id, "model");
        assert_eq!(c.name, "x");
        let named = cfg("base_seed = 1\nmodel.a.kind = bernoulli\nmodel.a.p = 0.5\nmodel.a.rational = true\nmodel.b.kind = bernoulli\nmodel.b.p = 0.3\nmodel.b.rational = true\nmodel.b.weight = 3\nmodel.b.min_settled_fraction = 0.5\npredictor = constant\npredictor.value = true\nloss = rationality\n");
        let c = resolve(&named, "x").unwrap();
        assert_eq!(c.models.len(), 2);
        assert_eq!(c.models[1].weight, 3.0);
        assert_eq!(c.models[1].thresholds.as_ref().unwrap().min_settled_fraction, Some(0.5));
    }

    #[test]
    fn missing_seed_and_stray_keys() {
        let e = resolve(&cfg("model.kind = geometric\nmodel.ratio = 0.5\n"), "x")
            .err()
            .unwrap();
        assert_eq!(e.key.as_deref(), Some("base_seed"));
        let e = resolve(&cfg("base_seed = 0\nmodel.kind = bernoulli\nmodel.p = 0.5\nmodel.rational = true\npredictor = constant\npredictor.value = true\nloss = rationality\nhorizn = 5\n"), "x").err().unwrap();
        assert_eq!((e.key.as_deref(), e.line), (Some("horizn"), Some(8)));
    }

    #[test]
    fn incompatible_pairing_is_reported() {
        let e = resolve(&cfg("base_seed = 0\nmodel.kind = bernoulli\nmodel.p = 0.5\nmodel.rational = true\npredictor = slln_mean\nloss = rationality\n"), "x").err().unwrap();
        assert!(e.message.contains("loss"), "{e}");
    }
}
