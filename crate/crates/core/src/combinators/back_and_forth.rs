//! Loss-driven switching over a countable predictor family.
//!
//! The walk visits `(1,1), (1,2), (2,2), (1,3), (2,3), (3,3), ...`, moving one
//! position per incurred loss and predicting with `Φ_s`. If some `Φ_k` never
//! errs on the realized sequence, the walk stops at the first `(k, t)` it
//! reaches, which is at most `k(k+1)/2 - 1` losses in.

use std::sync::Arc;

use crate::game::{Outcome, Prediction, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BFState {
    pub s: usize,
    pub t: usize,
}

impl Default for BFState {
    fn default() -> Self {
        Self { s: 1, t: 1 }
    }
}

impl BFState {
    pub fn advance(self) -> Self {
        if self.s < self.t {
            Self {
                s: self.s + 1,
                t: self.t,
            }
        } else {
            Self { s: 1, t: self.t + 1 }
        }
    }

    /// State after `losses` advances from `(1,1)`, in closed form.
    pub fn after(losses: u64) -> Self {
        // Position p = losses + 1 lies on row t with t(t-1)/2 < p <= t(t+1)/2.
        let p = losses + 1;
        let mut t = ((((8 * p) as f64).sqrt() - 1.0) / 2.0) as u64;
        while t * (t + 1) / 2 < p {
            t += 1;
        }
        while t > 1 && (t - 1) * t / 2 >= p {
            t -= 1;
        }
        Self {
            s: (p - t * (t - 1) / 2) as usize,
            t: t as usize,
        }
    }
}

/// Worst-case losses before the walk settles on a perfect `Φ_k`.
pub fn bf_error_bound(k: u64) -> u64 {
    assert!(k >= 1, "k is 1-based");
    k * (k + 1) / 2 - 1
}

pub type PredictorFamily = Arc<dyn Fn(usize) -> Box<dyn Predictor> + Send + Sync>;

/// Requires a supervised loss. Members are built on first admission (when
/// `t` reaches their index) and fed every later outcome; they do not see the
/// history before their admission.
pub struct BackAndForth {
    family: PredictorFamily,
    members: Vec<Box<dyn Predictor>>,
    state: BFState,
    losses: u64,
}

impl BackAndForth {
    pub fn new(family: PredictorFamily) -> Self {
        let first = family(1);
        Self {
            family,
            members: vec![first],
            state: BFState::default(),
            losses: 0,
        }
    }

    pub fn state(&self) -> BFState {
        self.state
    }

    pub fn losses(&self) -> u64 {
        self.losses
    }
}

impl Predictor for BackAndForth {
    fn predict(&self) -> Prediction {
        self.members[self.state.s - 1].predict()
    }

    fn observe(&mut self, outcome: &Outcome, revealed_loss: Option<bool>) {
        debug_assert!(revealed_loss.is_some(), "back-and-forth needs the loss bit");
        for m in self.members.iter_mut().filter(|m| !m.ignores_history()) {
            m.observe(outcome, None);
        }
        if revealed_loss == Some(true) {
            self.losses += 1;
            self.state = self.state.advance();
            while self.members.len() < self.state.t {
                let next = (self.family)(self.members.len() + 1);
                self.members.push(next);
            }
        }
    }

    fn requires_supervision(&self) -> bool {
        true
    }
}
