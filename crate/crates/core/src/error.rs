use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field tensor is not antisymmetric (max |F + F^T| = {0:e})")]
    NotAntisymmetric(f64),

    #[error("non-finite values produced in {0}")]
    NonFinite(String),

    #[error("degenerate toroidal point (mu = {mu}, eta = {eta})")]
    DegeneratePoint { mu: f64, eta: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario parameter error: {0}")]
    Scenario(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
