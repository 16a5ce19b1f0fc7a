use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}")]
    Quadrature { value: f64, error: f64 },

    #[error("h({x}) did not converge in {steps} steps; last iterates {previous:e} and {last:e}")]
    Extrapolation {
        x: f64,
        steps: usize,
        previous: f64,
        last: f64,
    },

    #[error("probability {value:e} lies outside [0, 1] beyond the clamping tolerance")]
    ProbabilityRange { value: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("phi({x}) = {value:e} is not positive")]
    NonPositive { x: f64, value: f64 },
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidModel(_) | Error::InvalidParameter(_))
    }
}
