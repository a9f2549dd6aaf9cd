//! Error type shared by every module.

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by spec construction, evaluation, planning and simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A spec violates its construction invariants (negative shape parameter,
    /// unsorted knots, ...). Configs that fail here are malformed inputs.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// An operation was called with an argument outside its domain
    /// (`theta <= 0`, `a < 1`, `trials = 0`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Paired vectors (weights/fidelities) have different lengths.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// A tabulated cost curve was evaluated beyond its last knot. There is no
    /// silent extrapolation: curvature guarantees do not survive it.
    #[error("extrapolation beyond tabulated knots: {0}")]
    Extrapolation(String),

    /// The requested computation is not defined for this cost regime
    /// (e.g. the convex search path on a concave or tabulated form).
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// An iterative solver failed to bracket or converge. Signals a malformed
    /// spec rather than a tolerance problem.
    #[error("solver diverged: {0}")]
    Divergence(String),

    /// A target value lies outside the attainable range of the function being
    /// inverted.
    #[error("target out of range: {0}")]
    OutOfRange(String),
}
