use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} lies outside [0, 1]")]
    Domain(f64),
    #[error("point {0} is a critical/singular location; a one-sided limit is required")]
    OneSidedLimitRequired(f64),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("unknown builtin map `{0}`")]
    UnknownMap(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("declared order {declared} at c = {location}{side} is inconsistent (ratio exponent drift {drift:.3})")]
    OrderMismatch { location: f64, side: &'static str, declared: f64, drift: f64 },
    #[error("point {0} is not covered by any retained cell")]
    NotCovered(f64),
    #[error("orbit of {0} hits the critical/singular set exactly")]
    SingularHit(f64),
    #[error("map file, line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
