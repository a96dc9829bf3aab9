use thiserror::Error;

/// Errors raised by the geometric routines.
///
/// Verification failures are not errors: they are reported through
/// [`crate::kinematics::VerificationReport`] and friends.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid signature: {0}")]
    Signature(String),

    #[error("basis indices must satisfy i < j < n, 0-based (got i={i}, j={j}, n={n})")]
    IndexOrder { i: usize, j: usize, n: usize },

    #[error("matrix is not in the pseudo-orthogonal Lie algebra (residual {residual:e})")]
    AlgebraConstraint { residual: f64 },

    #[error("matrix is not in the pseudo-orthogonal group (residual {residual:e})")]
    GroupConstraint { residual: f64 },

    #[error("orientation block determinant {det:e} is too close to zero")]
    DegenerateBlock { det: f64 },

    #[error("vectors span a degenerate subspace")]
    DegenerateSubspace,

    #[error("point is off the manifold (residual {residual:e})")]
    Membership { residual: f64 },

    #[error("vector is not J-orthogonal to the base point (residual {residual:e})")]
    Orthogonality { residual: f64 },

    #[error("direction must be unit or null (norm {norm:e})")]
    Normalization { norm: f64 },

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("vector does not match the requested transport flavor: {0}")]
    Flavor(String),

    #[error("invalid frame: {0}")]
    Frame(String),

    #[error("target coincides with the base point")]
    DegenerateTarget,

    #[error("metric is nearly singular (|det| = {det:e})")]
    MetricDegeneracy { det: f64 },

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
