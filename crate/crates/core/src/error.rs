use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, estimators and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation. `key` names the offending knob.
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    /// An outcome probability fell below the representable floor.
    #[error("probability underflow at step {step} (p = {probability:e}, seed {seed})")]
    Underflow { step: u64, probability: f64, seed: u64 },

    /// A state that must be normalized drifted beyond tolerance.
    #[error("state norm drifted to {norm} (tolerance {tolerance:e})")]
    NormDrift { norm: f64, tolerance: f64 },

    /// Fewer than two runs survived an ensemble estimate.
    #[error("only {surviving} of {requested} runs survived; at least 2 are required")]
    TooFewRuns { surviving: usize, requested: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that stem from user input rather than from the run itself.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
