//! Loss-driven walk over a doubly indexed family `Φ_(n, j)`.
//!
//! Positions follow anti-diagonals: `(1,1), (2,1), (1,2), (3,1), (2,2),
//! (1,3), ...`, so the `j` coordinate at position `s` never exceeds `s`.

use std::sync::Arc;

use crate::combinators::replay;
use crate::game::{Outcome, Prediction, Predictor};

/// `(n, j)` at 1-based position `s`.
pub fn grid_position(s: u64) -> (u64, u64) {
    assert!(s >= 1, "positions are 1-based");
    // Diagonal d holds positions d(d-1)/2 + 1 ..= d(d+1)/2.
    let mut d = ((((8 * s) as f64).sqrt() - 1.0) / 2.0) as u64;
    while d * (d + 1) / 2 < s {
        d += 1;
    }
    while d > 1 && (d - 1) * d / 2 >= s {
        d -= 1;
    }
    let offset = s - d * (d - 1) / 2;
    (d + 1 - offset, offset)
}

pub type GridFamily = Arc<dyn Fn(u64, u64) -> Box<dyn Predictor> + Send + Sync>;

/// Requires a supervised loss. Positions never repeat, so only the current
/// member is kept; a new member is replayed over the full history.
pub struct GridCombinator {
    family: GridFamily,
    position: u64,
    current: Box<dyn Predictor>,
    history: Vec<Outcome>,
}

impl GridCombinator {
    pub fn new(family: GridFamily) -> Self {
        let current = family(1, 1);
        Self {
            family,
            position: 1,
            current,
            history: Vec::new(),
        }
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn coordinates(&self) -> (u64, u64) {
        grid_position(self.position)
    }
}

impl Predictor for GridCombinator {
    fn predict(&self) -> Prediction {
        self.current.predict()
    }

    fn observe(&mut self, outcome: &Outcome, revealed_loss: Option<bool>) {
        debug_assert!(revealed_loss.is_some(), "grid combinator needs the loss bit");
        self.history.push(outcome.clone());
        self.current.observe(outcome, None);
        if revealed_loss == Some(true) {
            self.position += 1;
            let (n, j) = grid_position(self.position);
            let mut next = (self.family)(n, j);
            replay(next.as_mut(), &self.history);
            self.current = next;
        }
    }

    fn requires_supervision(&self) -> bool {
        true
    }
}
