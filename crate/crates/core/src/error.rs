use thiserror::Error;

/// Errors produced by operator and complex computations.
#[derive(Debug, Error)]
pub enum TorsionError {
    #[error("operator is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("algebra mismatch: {0}")]
    AlgebraMismatch(String),

    #[error("operator is not selfadjoint within tolerance {tol} (defect {defect})")]
    NotSelfAdjoint { defect: f64, tol: f64 },

    #[error("spectral grid is empty or not ascending")]
    BadGrid,

    #[error("divergent Fuglede-Kadison determinant{0}")]
    DivergentDeterminant(String),

    #[error("d^2 != 0: composition of differentials {degree} -> {degree_plus_two} has norm {norm}")]
    NotAComplex {
        degree: usize,
        degree_plus_two: usize,
        norm: f64,
    },

    #[error("morphism does not intertwine differentials at degree {degree} (defect {defect})")]
    NotAMorphism { degree: usize, defect: f64 },

    #[error("coupling violates the anticommuting condition at degree {degree} (defect {defect})")]
    BadCoupling { degree: usize, defect: f64 },

    #[error("operator is not invertible: {0}")]
    NotInvertible(String),

    #[error("morphism does not induce an isomorphism in cohomology at degree {0}")]
    NotCohomologyIso(usize),

    #[error("zeta argument outside the convergent half-plane: Re s = {re_s} <= {alpha}")]
    ZetaDivergent { re_s: f64, alpha: f64 },

    #[error("heat trace needs t > 0, got {0}")]
    NonPositiveTime(f64),

    #[error("theta must lie in (0,1) excluding integers, got {0}")]
    IntegralTwist(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-conditioned design matrix (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("degreewise sequence is not exact at degree {0}")]
    NotExact(usize),

    #[error("subdivision pair is not cancelling: {0}")]
    NotCancelling(String),
}

pub type Result<T> = std::result::Result<T, TorsionError>;
