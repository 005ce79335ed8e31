use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pole of the service transform at s = -mu")]
    Pole,

    #[error(
        "s = {re} + {im}i lies outside the region of convergence of the interarrival transform"
    )]
    OutsideConvergenceRegion { re: f64, im: f64 },

    #[error("UnstableP1: p = 1 requires rho < 1, got rho = {rho}")]
    UnstableP1 { rho: f64 },

    #[error("RootCountMismatch: expected {expected} left-half-plane roots, certified {found}")]
    RootCountMismatch { expected: usize, found: usize },

    #[error("NearMultipleRoots: roots {a} and {b} are closer than {tol}; the confluent case is not supported")]
    NearMultipleRoots { a: String, b: String, tol: f64 },

    #[error("SeriesNotConverged: truncation tail still above bound at order {order}")]
    SeriesNotConverged { order: usize },

    #[error("SingularSystem: condition number estimate {cond:e} exceeds {limit:e}")]
    SingularSystem { cond: f64, limit: f64 },

    #[error("ResidualTooLarge: held-out residual {residual:e} exceeds {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("TailNotConverged: tail mass {tail:e} after {bands} bands exceeds {eps:e}")]
    TailNotConverged { bands: usize, tail: f64, eps: f64 },

    #[error("IllConditioned: {0}")]
    IllConditioned(String),

    #[error("NoContraction: the fixed-point map is not a contraction for p = 1")]
    NoContraction,

    #[error("MaxIterations: no convergence after {0} iterations")]
    MaxIterations(usize),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("x = {x} is outside band {band} = [{lo}, {hi}]")]
    OutOfBand {
        band: usize,
        x: f64,
        lo: f64,
        hi: f64,
    },
}

impl Error {
    /// Short machine-readable tag, e.g. `UnstableP1`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Pole => "Pole",
            Error::OutsideConvergenceRegion { .. } => "OutsideConvergenceRegion",
            Error::UnstableP1 { .. } => "UnstableP1",
            Error::RootCountMismatch { .. } => "RootCountMismatch",
            Error::NearMultipleRoots { .. } => "NearMultipleRoots",
            Error::SeriesNotConverged { .. } => "SeriesNotConverged",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::TailNotConverged { .. } => "TailNotConverged",
            Error::IllConditioned(_) => "IllConditioned",
            Error::NoContraction => "NoContraction",
            Error::MaxIterations(_) => "MaxIterations",
            Error::Unsupported(_) => "Unsupported",
            Error::OutOfBand { .. } => "OutOfBand",
        }
    }

    /// Input errors as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::UnstableP1 { .. }
                | Error::Unsupported(_)
                | Error::OutOfBand { .. }
                | Error::Pole
                | Error::OutsideConvergenceRegion { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
