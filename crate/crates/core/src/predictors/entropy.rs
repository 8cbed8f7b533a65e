//! Entropy threshold predictors for i.i.d. draws over the naturals.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{Outcome, Prediction, Predictor};
use crate::models::h;

const INV_E: f64 = 1.0 / std::f64::consts::E;

/// Modulus of continuity of `h(x) = -x ln x` on `[0, 1]`:
/// `sup_(|x - y| <= δ) |h(x) - h(y)| = max(h(δ), h(1 - δ))`.
pub fn h_modulus(delta: f64) -> f64 {
    if delta >= INV_E {
        return INV_E;
    }
    h(delta).max(h(1.0 - delta))
}

/// Largest `δ` with modulus at most `target`, found by bisection on
/// `(0, 1/e)`; 1 when every `δ` qualifies.
pub fn inverse_modulus(target: f64) -> f64 {
    if target >= INV_E {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, INV_E);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h_modulus(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Phase accuracy `ε_n`: `|h(x) - h(x + y)| <= 1/n^2` whenever `|y| <= ε_n`.
pub fn phase_epsilon(n: u64) -> f64 {
    inverse_modulus(1.0 / (n * n) as f64)
}

/// Sample size for phase `n`: every frequency of symbols `0..n` is within
/// `ε_n / 2` with probability at least `1 - 2^-n` (Hoeffding, union bound):
/// `ceil(2 ln(2n 2^n) / ε_n^2)`.
pub fn phase_samples(n: u64) -> u64 {
    let eps = phase_epsilon(n);
    (2.0 * ((2 * n) as f64 * 2f64.powi(n as i32)).ln() / (eps * eps)).ceil() as u64
}

/// Smallest value of `h` over `[lo, hi] ∩ [0, 1]`. `h` is concave, so the
/// minimum sits at an endpoint.
pub fn h_box_min(lo: f64, hi: f64) -> (f64, f64) {
    let lo = lo.clamp(0.0, 1.0);
    let hi = hi.clamp(0.0, 1.0);
    if h(lo) <= h(hi) {
        (lo, h(lo))
    } else {
        (hi, h(hi))
    }
}

/// Lower estimate `sum_i min_(box_i) h` of the partial entropy.
pub fn underestimate(frequencies: &[f64], half_width: f64) -> f64 {
    frequencies
        .iter()
        .map(|&p| h_box_min(p - half_width, p + half_width).1)
        .sum()
}

/// Answers "is H(p) <= threshold?".
///
/// Phase `n` ends once `N_n` outcomes have been seen. It takes the empirical
/// frequencies of symbols `0..n`, replaces each by the point of its box
/// `[p̄ - ε_n/2, p̄ + ε_n/2]` minimising `h`, and answers yes iff the sum of
/// `h` over those points is at most the threshold. The answer holds until
/// the next phase ends; before the first it is yes.
#[derive(Debug, Clone)]
pub struct EntropyLePredictor {
    threshold: f64,
    counts: HashMap<u64, u64>,
    seen: u64,
    phase: u64,
    next_boundary: u64,
    estimate: f64,
}

impl EntropyLePredictor {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::Config(format!("entropy threshold {threshold} must be positive")));
        }
        Ok(Self {
            threshold,
            counts: HashMap::new(),
            seen: 0,
            phase: 0,
            next_boundary: phase_samples(1),
            estimate: 0.0,
        })
    }

    pub fn phase(&self) -> u64 {
        self.phase
    }

    /// Last phase's lower entropy estimate.
    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    fn close_phase(&mut self) {
        let n = self.phase + 1;
        let total = self.seen as f64;
        let freqs: Vec<f64> = (0..n)
            .map(|s| *self.counts.get(&s).unwrap_or(&0) as f64 / total)
            .collect();
        self.estimate = underestimate(&freqs, phase_epsilon(n) / 2.0);
        self.phase = n;
        self.next_boundary = phase_samples(n + 1).max(self.seen + 1);
    }
}

impl Predictor for EntropyLePredictor {
    fn predict(&self) -> Prediction {
        Prediction::Binary(self.estimate <= self.threshold)
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        *self
            .counts
            .entry(outcome.as_nat().expect("natural outcomes"))
            .or_insert(0) += 1;
        self.seen += 1;
        if self.seen == self.next_boundary {
            self.close_phase();
        }
    }
}

/// Finite union of closed intervals of entropy values.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet(pub Vec<(f64, f64)>);

impl IntervalSet {
    pub fn distance(&self, x: f64) -> f64 {
        self.0
            .iter()
            .map(|&(a, b)| {
                if x < a {
                    a - x
                } else if x > b {
                    x - b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Level `n` of a separated pair of nestings: `inside` grows inside the
/// target set, `outside` inside its complement, `separation` apart.
#[derive(Debug, Clone)]
pub struct SeparatedLevel {
    pub inside: IntervalSet,
    pub outside: IntervalSet,
    pub separation: f64,
}

pub type SeparatedNesting = Arc<dyn Fn(u64) -> SeparatedLevel + Send + Sync>;

/// `ρ(N)`: bound on the entropy carried by symbols `>= N`.
pub type TailEntropyBound = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

const CUTOFF_LIMIT: u64 = 1 << 40;

/// Smallest `N` with `ρ(N) < target`.
pub fn support_cutoff(rho: &TailEntropyBound, target: f64) -> Result<u64> {
    if rho(0) < target {
        return Ok(0);
    }
    // Exponential search then bisection; assumes `ρ` nonincreasing.
    let mut hi = 1u64;
    while rho(hi) >= target {
        if hi >= CUTOFF_LIMIT {
            return Err(Error::Config(format!(
                "tail entropy bound stays above {target} up to {CUTOFF_LIMIT}"
            )));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if rho(mid) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsigmaStage {
    pub n: u64,
    pub separation: f64,
    pub cutoff: u64,
    /// Per-symbol frequency accuracy.
    pub accuracy: f64,
    pub samples: u64,
}

/// Stage plan: `N(n)` with `ρ(N) < ε/8`, accuracy `δ` with
/// `ω(δ) <= ε/(8N)`, and the Hoeffding sample size making all `N`
/// frequencies `δ`-accurate with probability `1 - 2^-n`.
pub fn fsigma_stage(n: u64, separation: f64, rho: &TailEntropyBound) -> Result<FsigmaStage> {
    if !(separation > 0.0) {
        return Err(Error::Config(format!("separation at level {n} must be positive")));
    }
    let cutoff = support_cutoff(rho, separation / 8.0)?.max(1);
    let accuracy = inverse_modulus(separation / (8.0 * cutoff as f64));
    let samples = ((2.0 * cutoff as f64 * 2f64.powi(n as i32)).ln() / (2.0 * accuracy * accuracy)).ceil() as u64;
    Ok(FsigmaStage {
        n,
        separation,
        cutoff,
        accuracy,
        samples,
    })
}

/// Decides membership of `H(p)` in an F_σ-separable set for classes whose
/// tail entropy is dominated by `ρ`.
///
/// Stage `n` closes once its sample size is reached; it forms the plug-in
/// entropy of symbols `0..N(n)` and answers with the side (`inside` or
/// `outside` at level `n`) nearer to it, ties going inside.
pub struct EntropyFsigmaPredictor {
    nesting: SeparatedNesting,
    rho: TailEntropyBound,
    counts: HashMap<u64, u64>,
    seen: u64,
    stage: u64,
    next: FsigmaStage,
    answer: bool,
    estimate: f64,
}

/// Stages checked for a finite cutoff at construction.
const VALIDATED_STAGES: u64 = 6;

impl EntropyFsigmaPredictor {
    pub fn new(nesting: SeparatedNesting, rho: TailEntropyBound) -> Result<Self> {
        for n in 1..=VALIDATED_STAGES {
            fsigma_stage(n, nesting(n).separation, &rho)?;
        }
        let next = fsigma_stage(1, nesting(1).separation, &rho)?;
        Ok(Self {
            nesting,
            rho,
            counts: HashMap::new(),
            seen: 0,
            stage: 0,
            next,
            answer: true,
            estimate: 0.0,
        })
    }

    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn next_stage(&self) -> FsigmaStage {
        self.next
    }
}

impl Predictor for EntropyFsigmaPredictor {
    fn predict(&self) -> Prediction {
        Prediction::Binary(self.answer)
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        *self
            .counts
            .entry(outcome.as_nat().expect("natural outcomes"))
            .or_insert(0) += 1;
        self.seen += 1;
        if self.seen < self.next.samples {
            return;
        }
        let total = self.seen as f64;
        self.estimate = (0..self.next.cutoff)
            .map(|s| h(*self.counts.get(&s).unwrap_or(&0) as f64 / total))
            .sum();
        let level = (self.nesting)(self.next.n);
        self.answer = level.inside.distance(self.estimate) <= level.outside.distance(self.estimate);
        self.stage = self.next.n;
        let n = self.stage + 1;
        // Validated at construction for early stages; later failures keep the
        // current answer forever.
        self.next = fsigma_stage(n, (self.nesting)(n).separation, &self.rho).unwrap_or(FsigmaStage {
            n,
            separation: 0.0,
            cutoff: 0,
            accuracy: 0.0,
            samples: u64::MAX,
        });
        self.next.samples = self.next.samples.max(self.seen + 1);
    }
}
