//! Meta-predictors built from families of weaker predictors and learners.

pub mod back_and_forth;
pub mod boost;
pub mod grid;
pub mod identify;
pub mod nested;
pub mod staged;

pub use back_and_forth::{bf_error_bound, BFState, BackAndForth};
pub use boost::BoostMajority;
pub use grid::{grid_position, GridCombinator};
pub use identify::{IdentifyClass, IdentifyThenPredict, MembershipTester, Phase};
pub use nested::{EtaPredictorSpec, NestedFamily, NestedUnion};
pub use staged::{LearnerSpec, StagedLearner, StoppingRule};

use crate::game::{Outcome, Predictor};

/// Feeds a history to a freshly built predictor, unsupervised.
pub(crate) fn replay(predictor: &mut dyn Predictor, history: &[Outcome]) {
    if predictor.ignores_history() {
        return;
    }
    for x in history {
        predictor.observe(x, None);
    }
}
