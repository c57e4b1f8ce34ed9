//! Error types shared by all modules.

use thiserror::Error;

/// Library error.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An event fell outside a provider's domain (grid bounds, stencil margin).
    #[error("outside provider domain: {0}")]
    Domain(String),
    /// The amplitude at the query point is below the floor; phase-derived
    /// quantities are undefined there.
    #[error("amplitude node: {0}")]
    Node(String),
    /// Invalid parameters or inconsistent setup.
    #[error("configuration: {0}")]
    Config(String),
    /// A solve or integration produced non-finite or singular data.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A quantity left the validity regime of an expansion.
    #[error("outside expansion regime: {0}")]
    OutOfRegime(String),
    /// Two records cannot be compared (non-monotone time, no overlap, arity).
    #[error("records not comparable: {0}")]
    Comparison(String),
    /// A velocity cannot be initialized from the requested data.
    #[error("initialization: {0}")]
    Init(String),
}

/// Library result.
pub type Result<T> = std::result::Result<T, Error>;
