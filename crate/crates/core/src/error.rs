//! Error type shared by every module.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the toolkit.
///
/// Numerical guards (`NonConvergent`, `ChartOverflow`) signal that a point
/// left the exponential log chart; callers typically shrink the domain
/// radius. Validation errors signal impossible requests and are reported
/// before any work starts.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("matrix logarithm did not converge (point outside the log chart)")]
    NonConvergent,
    #[error("diffusion left the log chart before exiting the domain; reduce the radius")]
    ChartOverflow,
    #[error("zero element has no angular part")]
    ZeroElement,
    #[error("degenerate pair: the first-order relative matrix vanishes")]
    DegeneratePair,
    #[error("multi-index order {0} unsupported (orders 1..=3 are implemented)")]
    UnsupportedOrder(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("need at least {needed} paths, got {got}")]
    InsufficientPaths { needed: usize, got: usize },
    #[error("point cloud too small: {0}")]
    InsufficientCloud(String),
    #[error("singular pair: alpha(u,v) = 0 for distinct cloud points")]
    SingularPair,
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
}
