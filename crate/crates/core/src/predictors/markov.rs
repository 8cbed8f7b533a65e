//! Stationary-distribution estimators for finite irreducible chains.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{Outcome, Prediction, Predictor};

fn strongly_connected(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let w = if forward { p[i][j] } else { p[j][i] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary law of a row-stochastic matrix.
///
/// Solves `π P' = e_1` where `P' = I - P` with its first column replaced by
/// ones. Negative round-off is clipped and the result renormalised.
pub fn stationary_from_transition(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    if n == 0 || p.iter().any(|r| r.len() != n) {
        return Err(Error::Precondition(
            "transition matrix must be square and nonempty".into(),
        ));
    }
    if !strongly_connected(p) {
        return Err(Error::Degenerate("transition matrix is reducible".into()));
    }
    let mut m = DMatrix::<f64>::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - p[i][j]);
    m.column_mut(0).fill(1.0);
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[0] = 1.0;
    let pi = m
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("singular system for the stationary law".into()))?;
    let clipped: Vec<f64> = pi.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate("stationary solve produced no mass".into()));
    }
    Ok(clipped.into_iter().map(|x| x / total).collect())
}

/// Row-normalises transition counts and solves for the stationary law.
pub fn stationary_from_counts(counts: &[Vec<u64>]) -> Result<Vec<f64>> {
    let mut p = Vec::with_capacity(counts.len());
    for (i, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(Error::Degenerate(format!("state {i} never left")));
        }
        p.push(row.iter().map(|&c| c as f64 / total as f64).collect());
    }
    stationary_from_transition(&p)
}

/// Plug-in stationary estimate from observed transitions. Emits the uniform
/// law until the estimated chain becomes irreducible.
#[derive(Debug, Clone)]
pub struct MatrixStationary {
    counts: Vec<Vec<u64>>,
    previous: Option<usize>,
    estimate: Vec<f64>,
}

impl MatrixStationary {
    pub fn new(states: usize) -> Self {
        assert!(states >= 1);
        Self {
            counts: vec![vec![0; states]; states],
            previous: None,
            estimate: vec![1.0 / states as f64; states],
        }
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn estimate(&self) -> &[f64] {
        &self.estimate
    }

    /// Recomputes the estimate; the observe loop leaves this to the caller
    /// so long runs do not pay a solve per step.
    pub fn refresh(&mut self) -> Result<()> {
        self.estimate = stationary_from_counts(&self.counts)?;
        Ok(())
    }

    fn record(&mut self, state: usize) {
        if let Some(prev) = self.previous {
            self.counts[prev][state] += 1;
        }
        self.previous = Some(state);
    }
}

impl Predictor for MatrixStationary {
    fn predict(&self) -> Prediction {
        Prediction::Distribution(self.estimate.clone())
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        let state = outcome.as_nat().expect("markov outcomes are states") as usize;
        self.record(state);
        // A failed solve keeps the previous estimate.
        let _ = self.refresh();
    }
}

/// `m = ceil(c ln(n / eta) / eps^2)`.
pub fn regeneration_cycles(states: usize, epsilon: f64, eta: f64, c: f64) -> u64 {
    (c * (states as f64 / eta).ln() / (epsilon * epsilon)).ceil() as u64
}

/// Regeneration-cycle estimator with a built-in stopping rule.
///
/// The anchor is the first observed state. A cycle runs from a visit to the
/// anchor until the first return to it after every state has been seen;
/// `T` counts visits in the half-open cycle `(start, end]` and `C` its length.
/// The estimate is `sum T / sum C` over completed cycles, and the rule fires
/// when the `m`-th cycle completes.
#[derive(Debug, Clone)]
pub struct RegenerationEstimator {
    states: usize,
    target: u64,
    anchor: Option<usize>,
    step: u64,
    seen: Vec<bool>,
    unseen: usize,
    current: Vec<u64>,
    current_len: u64,
    visits: Vec<u64>,
    total_len: u64,
    cycles: u64,
    stopped_at: Option<u64>,
}

impl RegenerationEstimator {
    pub fn new(states: usize, epsilon: f64, eta: f64, c: f64) -> Result<Self> {
        if states == 0 {
            return Err(Error::Config("chain needs at least one state".into()));
        }
        for (name, v) in [("epsilon", epsilon), ("eta", eta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if !(c > 0.0) {
            return Err(Error::Config(format!("cycle constant {c} must be positive")));
        }
        Ok(Self::with_cycles(states, regeneration_cycles(states, epsilon, eta, c)))
    }

    pub fn with_cycles(states: usize, cycles: u64) -> Self {
        Self {
            states,
            target: cycles.max(1),
            anchor: None,
            step: 0,
            seen: vec![false; states],
            unseen: states,
            current: vec![0; states],
            current_len: 0,
            visits: vec![0; states],
            total_len: 0,
            cycles: 0,
            stopped_at: None,
        }
    }

    pub fn target_cycles(&self) -> u64 {
        self.target
    }

    pub fn completed_cycles(&self) -> u64 {
        self.cycles
    }

    pub fn estimate(&self) -> Vec<f64> {
        if self.total_len == 0 {
            return vec![1.0 / self.states as f64; self.states];
        }
        self.visits.iter().map(|&t| t as f64 / self.total_len as f64).collect()
    }

    fn reset_cycle(&mut self, anchor: usize) {
        self.seen.iter_mut().for_each(|s| *s = false);
        self.seen[anchor] = true;
        self.unseen = self.states - 1;
        self.current.iter_mut().for_each(|t| *t = 0);
        self.current_len = 0;
    }

    pub fn push(&mut self, state: usize) {
        self.step += 1;
        let Some(anchor) = self.anchor else {
            self.anchor = Some(state);
            self.reset_cycle(state);
            if self.states == 1 {
                // Every step is a complete cycle on a single state.
                self.unseen = 0;
            }
            return;
        };
        self.current[state] += 1;
        self.current_len += 1;
        if !self.seen[state] {
            self.seen[state] = true;
            self.unseen -= 1;
        }
        if state == anchor && self.unseen == 0 {
            for (v, c) in self.visits.iter_mut().zip(&self.current) {
                *v += c;
            }
            self.total_len += self.current_len;
            self.cycles += 1;
            if self.cycles == self.target && self.stopped_at.is_none() {
                self.stopped_at = Some(self.step);
            }
            self.reset_cycle(anchor);
            if self.states == 1 {
                self.unseen = 0;
            }
        }
    }
}

impl Predictor for RegenerationEstimator {
    fn predict(&self) -> Prediction {
        Prediction::Distribution(self.estimate())
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        self.push(outcome.as_nat().expect("markov outcomes are states") as usize);
    }

    fn stopped_at(&self) -> Option<u64> {
        self.stopped_at
    }
}

/// Runs the regeneration estimator on `stream` until its rule fires.
/// Returns the estimate at the stopping step and the step itself.
pub fn regeneration_estimate<I>(
    stream: I,
    mut estimator: RegenerationEstimator,
    horizon: u64,
) -> Result<(Vec<f64>, u64)>
where
    I: IntoIterator<Item = Outcome>,
{
    for outcome in stream.into_iter().take(horizon as usize) {
        estimator.observe(&outcome, None);
        if let Some(step) = estimator.stopped_at {
            return Ok((estimator.estimate(), step));
        }
    }
    Err(Error::Timeout { horizon })
}
