use thiserror::Error;

/// Errors raised by the delay estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sampled basis is ill-conditioned: cond = {cond:.3e} exceeds threshold {threshold:.3e}; revise the sampling time, sample count or Laguerre parameter")]
    IllConditioned { cond: f64, threshold: f64 },

    #[error("input spectrum has |u_0| = {u0:.3e}; the Toeplitz input matrix is singular")]
    SingularInput { u0: f64 },

    #[error("B'B = {btb:.3e} is too small to estimate the delay")]
    DegenerateB { btb: f64 },

    #[error("input derivative carries no information about the delay")]
    ZeroInformation,

    #[error("cross-correlation is flat; the data carries no usable delay information")]
    FlatCorrelation,

    #[error("design problem is infeasible: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed dataset file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
