use thiserror::Error;

/// Crate-wide error type.
///
/// Geometry errors (`NonSmoothBody`, `SingularHessian`, …) signal that an
/// operation was asked of a body outside its hypotheses; numerical errors
/// (`QuadratureBudgetExceeded`, `FitUnreliable`, …) signal that a result
/// could not be certified to the requested tolerance. Callers that can
/// degrade gracefully should match on the variant, not the message.
#[derive(Debug, Error)]
pub enum Error {
    /// Operation requires a twice-differentiable boundary with positive
    /// curvature and the body does not provide one.
    #[error("operation requires a C2+ body, got {0}")]
    NonSmoothBody(&'static str),

    /// The restricted support Hessian is numerically singular; the boundary
    /// is flat (or the body invalid) in this direction.
    #[error("singular support Hessian at direction {0:?} (det = {1:e})")]
    SingularHessian(Vec<f64>, f64),

    /// Radial function vanished: the origin is not interior.
    #[error("degenerate body: radial function vanished")]
    DegenerateBody,

    /// Linear image of a body requires an invertible matrix.
    #[error("matrix is singular (|det| = {0:e})")]
    SingularMatrix(f64),

    /// Adaptive refinement hit its panel budget before reaching tolerance.
    #[error("quadrature budget exceeded: error estimate {achieved:e} > tolerance {requested:e}")]
    QuadratureBudgetExceeded { achieved: f64, requested: f64 },

    /// An integrand evaluated to NaN/inf at the given node.
    #[error("non-finite integrand at node {0:?}")]
    NonFiniteIntegrand(Vec<f64>),

    /// Parameter outside the operation's domain (cap heights, section
    /// offsets, δ ranges, …).
    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    /// Curvature integrals exclude the exponent p = -n.
    #[error("exponent p = {0} is excluded (too close to -n = {1})")]
    ExcludedExponent(f64, f64),

    /// Mixed functionals need bodies of one common dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Centroid-body exponents start at 1.
    #[error("exponent {0} < 1 for a centroid body")]
    ExponentTooSmall(f64),

    /// Operation requires a body of volume 1; wrap it in `Body::normalized`.
    #[error("body volume {0} is not 1 within tolerance; normalize first")]
    NotUnitVolume(f64),

    /// Bracketed root-finding failed to converge or to bracket.
    #[error("root-find failed: {0}")]
    RootFindFailure(String),

    /// Concave maximization failed to converge.
    #[error("optimization failed: {0}")]
    OptimizationFailure(String),

    /// Least-squares extrapolation residual too large to trust the limit.
    #[error("limit fit unreliable: residual {residual:e} exceeds {threshold:e}")]
    FitUnreliable { residual: f64, threshold: f64 },

    /// No analytic polar body exists in the catalog for this body.
    #[error("polar body not in catalog for {0}")]
    PolarNotInCatalog(&'static str),

    /// Sampling route not available for this body.
    #[error("unsupported body for this operation: {0}")]
    UnsupportedBody(&'static str),

    /// Point claimed to lie on the boundary does not.
    #[error("point is off the boundary (gauge = {0})")]
    OffBoundary(f64),

    /// Closed-form curvature undefined (axis point of an l_r ball, r < 2).
    #[error("curvature formula singular at this boundary point")]
    UndefinedCurvature,

    /// Argument outside a closed form's domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Malformed declarative body/experiment configuration.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
