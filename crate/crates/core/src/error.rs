use thiserror::Error;

/// Errors raised by the kit. Times and magnitudes are reported as `f64`
/// regardless of the scalar type the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is numerically singular (pivot {pivot:e} below tolerance {tol:e})")]
    SingularMatrix { pivot: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} lies outside the coefficient domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("time {t} lies outside the integrated span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("base solution is not regular on the requested span (escape near t = {t})")]
    BaseNotRegular { t: f64 },

    #[error("fundamental matrix became numerically singular at t = {t} (|det| = {det:e})")]
    NearSingularFundamental { t: f64, det: f64 },

    #[error("I + Λμ is singular at t = {t}: the family member leaves the regular regime")]
    FamilyBlowUp { t: f64 },

    #[error("base solution is not normal: μ is not bounded on the horizon")]
    BaseNotNormal,

    #[error("tail integral ν diverges")]
    NuDivergent,

    #[error("tail integral ν is singular at t = {t}")]
    NuSingular { t: f64 },

    #[error("initial Φ is singular")]
    SingularInitialPhi,

    #[error("no regular solution found among the sampled initial values")]
    NoRegularSolutionFound,
}

pub type Result<T> = std::result::Result<T, Error>;
