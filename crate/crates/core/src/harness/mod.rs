//! Monte Carlo experiments and brute-force checks of the distance and testing bounds.

pub mod monte_carlo;
pub mod oracles;

pub use monte_carlo::{
    estimate_eta_predictability, log_grid, negative_demo, run_monte_carlo, CurvePoint, ExperimentConfig,
    ExperimentReport, ModelReport, Thresholds, TrialResult, WeightedModel,
};
