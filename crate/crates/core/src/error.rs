use thiserror::Error;

use crate::game::PredictionKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameters, incompatible pairings, or a supervised-only
    /// component placed in an unsupervised experiment.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The predictor answered with a variant the loss cannot score.
    #[error("predictor emitted {found:?} but loss `{loss}` expects {expected:?}")]
    IncompatiblePrediction {
        loss: String,
        expected: PredictionKind,
        found: PredictionKind,
    },

    #[error("loss `{loss}` needs model attribute `{attribute}`")]
    MissingAttribute { loss: String, attribute: &'static str },

    /// Estimated quantity is not identifiable from the data seen so far
    /// (for example a reducible empirical transition matrix).
    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("stopping rule did not fire within {horizon} steps")]
    Timeout { horizon: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
