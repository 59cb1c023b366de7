//! Self-supervised inverse kinematics learning for serial revolute arms.
//!
//! The forward model (analytic forward kinematics of a [`kinematics::KinematicChain`])
//! is assumed known; the inverse model is a from-scratch MLP
//! ([`neuralnet::Mlp`]) trained by coordinated rounds of goal-directed
//! sampling and supervised retraining ([`emssl`]). Around that core live:
//!
//! - [`datagen`] — motor-babbling datasets, normalization, train/test splits
//! - [`baselines`] — direct regression and distal supervised trainers
//! - [`adaptation`] — recovery after link-length drift (forward-model refit
//!   or sampling against the changed arm directly)
//! - [`bench`] — timing harness for the sampling acceleration strategies
//! - [`checkpoint`] — value-exact model persistence
//! - [`testkit`] — independent verification oracles used by the test suites
//!
//! Everything is seeded and deterministic: a rerun with the same
//! configuration reproduces every non-timing output bit for bit.

pub mod adaptation;
pub mod baselines;
pub mod bench;
pub mod checkpoint;
pub mod datagen;
pub mod emssl;
pub mod kinematics;
pub mod linalg;
pub mod neuralnet;
pub mod rng;
pub mod testkit;

/// Common result type for this library.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by chain construction, training, and persistence.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}{}", context_suffix(.context))]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("link length must be positive, got {length} cm at link {index}")]
    NonPositiveLength { index: usize, length: f64 },

    #[error("inverted joint limits at joint {index}: lo {lo} > hi {hi}")]
    InvertedLimits { index: usize, lo: f64, hi: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("forward-model refit diverged: loss increased {0} steps in a row")]
    RefitDiverged(usize),

    #[error("strategy outputs disagree: {0}")]
    StrategyMismatch(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

impl Error {
    pub(crate) fn dims(expected: usize, got: usize, context: &'static str) -> Self {
        Error::DimensionMismatch {
            expected,
            got,
            context,
        }
    }
}
