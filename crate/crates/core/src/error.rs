use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("not locally strongly convex: minimum sampled Hessian eigenvalue {min_eigenvalue}")]
    NotStronglyConvex { min_eigenvalue: f64 },

    #[error("radius too small: R = {radius} must exceed R0 = {r0}")]
    RadiusTooSmall { radius: f64, r0: f64 },

    #[error("no closed form registered for family `{family}`")]
    NoClosedForm { family: String },

    #[error("singular characteristic: f' vanishes between x0 = {x0} and x = {x}")]
    SingularCharacteristic { x0: f64, x: f64 },

    #[error("support outside ball: point at distance {distance} exceeds R = {radius}")]
    SupportOutsideBall { distance: f64, radius: f64 },

    #[error("covariance not PSD: eigenvalue {eigenvalue}")]
    CovarianceNotPsd { eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
