//! Error type shared across the crate.

/// Errors reported by source construction, criterion evaluation, and solving.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A source failed validation (probabilities, labels, dimensions, ...).
    #[error("invalid source: {0}")]
    InvalidSource(String),

    /// A scalar parameter was outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A weight vector's length does not match the source dimension.
    #[error("weight vector has {got} coordinates but the source has {expected} features")]
    DimensionMismatch {
        /// Number of features of the source.
        expected: usize,
        /// Length of the supplied weight vector.
        got: usize,
    },

    /// A feature index was outside `0..n`.
    #[error("feature index {index} out of range for a source with {n} features")]
    FeatureIndexOutOfRange {
        /// The offending index.
        index: usize,
        /// Number of features of the source.
        n: usize,
    },

    /// Exact mask enumeration would require more than `2^cap` terms.
    #[error(
        "atom has {nonzero} coordinates with w_i * x_i != 0, exceeding the \
         exact-enumeration cap of {cap}"
    )]
    EnumerationCapExceeded {
        /// Number of coordinates that would need enumeration.
        nonzero: usize,
        /// The enumeration cap.
        cap: usize,
    },

    /// The dropout criterion has no unique minimizer on this source.
    #[error(
        "dropout criterion has no unique minimizer: feature {feature} never \
         votes against the label (or never votes for it) on the support"
    )]
    NoUniqueMinimizer {
        /// Index of the first offending feature.
        feature: usize,
    },

    /// A gradient was requested for the non-differentiable L1 criterion.
    #[error("the L1 criterion is not differentiable; use the proximal solver")]
    NonsmoothGradient,

    /// A probability mass function failed validation.
    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    /// Exhaustive expansion of an exchangeable source was too large.
    #[error("exact expansion supports at most {cap} features, got {n}")]
    ExpansionTooLarge {
        /// Requested dimension.
        n: usize,
        /// Maximum supported dimension.
        cap: usize,
    },

    /// A grid-scan window was degenerate or under-resolved.
    #[error("invalid scan window: {0}")]
    InvalidWindow(String),

    /// A solver configuration failed validation.
    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
