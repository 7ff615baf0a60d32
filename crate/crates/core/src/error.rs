//! Error type shared by all modules of the crate.

/// Errors reported by construction and certification routines.
///
/// Numerical diagnostics carry the measured quantity so callers can log how
/// far an input was from admissible.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("the zero vector has no direction")]
    ZeroVector,

    #[error("{0}")]
    NotAMetric(String),

    #[error("matrix is not orthogonal: deviation {deviation:.3e}")]
    NotOrthogonal { deviation: f64 },

    #[error("subspace is not totally isotropic: residual {residual:.3e}")]
    NotIsotropic { residual: f64 },

    #[error("subspaces are not transversal: margin {margin:.3e}")]
    NotTransversal { margin: f64 },

    #[error("angle repeated modulo 2*pi at positions {i} and {j}")]
    RepeatedAngle { i: usize, j: usize },

    #[error("spectral radius {rho:.6e} exceeds the admissible limit {limit}")]
    SpectralRadiusTooLarge { rho: f64, limit: f64 },

    #[error("matrix is singular or too ill-conditioned to invert")]
    Singular,

    #[error(
        "spectral split inconclusive: eigenvalue modulus {modulus:.9} falls in the guard band around 1"
    )]
    Inconclusive { modulus: f64 },

    #[error("iteration failed to converge after {iterations} steps")]
    NoConvergence { iterations: usize },

    #[error("map is not proximal: leading moduli {first:.6e} and {second:.6e}")]
    NotProximal { first: f64, second: f64 },

    #[error("map is not pseudohyperbolic: {reason}")]
    NotPseudoHyperbolic { reason: String },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires odd d, got d = {0}")]
    EvenDimension(usize),

    #[error("group is not certified: {0}")]
    NotCertified(String),
}

pub type Result<T> = std::result::Result<T, Error>;
