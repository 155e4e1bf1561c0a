use thiserror::Error;

/// Errors raised while building models or running discrepancy tests.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("point {point:?} is not strictly inside {domain}")]
    OutsideDomain { point: Vec<f64>, domain: String },

    #[error("sample row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial} (nu={nu}, n={n}): {source}")]
    InTrial {
        trial: u64,
        nu: f64,
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("derivative of the auxiliary function is singular at {0:?}")]
    SingularDerivative(Vec<f64>),

    #[error("degenerate bandwidth: all sample points coincide")]
    DegenerateBandwidth,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("log density ratio {0:.1} overflows; the two models are badly mismatched in scale")]
    RatioOverflow(f64),

    #[error("rejection sampler exhausted {attempts} attempts with acceptance rate {rate:.4}")]
    AcceptanceExhausted { attempts: usize, rate: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("density underflows on every quadrature node")]
    DensityUnderflow,

    #[error("{0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error stems from user-supplied configuration or data.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::AtRow { .. }
            | Error::Config(_)
            | Error::Io(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::NotPositiveDefinite { .. }
            | Error::OutsideDomain { .. }
            | Error::TooFewSamples { .. }
            | Error::DegenerateBandwidth => true,
            Error::InTrial { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    pub fn at_row(self, row: usize) -> Self {
        Error::AtRow {
            row,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
