use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller supplied an invalid argument (bad dimension, out-of-range value).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Two shapes that must agree do not.
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: String,
        found: String,
    },
    /// Internal state does not satisfy an invariant (stale cache, inconsistent model).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {epoch}, batch {batch}: {reason}")]
    Training {
        epoch: usize,
        batch: usize,
        reason: String,
    },
    /// An optimizer received a non-finite gradient; parameters were left untouched.
    #[error("non-finite gradient at optimizer step {step}")]
    NonFiniteGradient { step: u64 },
    /// A metric is undefined for the given input.
    #[error("metric undefined: {0}")]
    Metric(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl core::fmt::Display,
        found: impl core::fmt::Display,
    ) -> Self {
        use alloc::string::ToString;
        Error::Shape {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
