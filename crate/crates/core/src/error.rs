use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid projector pair: {0}")]
    InvalidProjectorPair(String),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("identifiability condition fails: alpha*beta = {0} >= 1")]
    NotIdentifiable(f64),
    #[error("recovery bound not applicable: {0}")]
    BoundNotApplicable(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(what: impl Into<String>) -> Self {
        Error::Shape(what.into())
    }

    pub(crate) fn param(what: impl Into<String>) -> Self {
        Error::InvalidParameter(what.into())
    }
}
