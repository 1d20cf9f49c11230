use thiserror::Error;

/// Errors raised by grid construction, operators, solvers and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample {value} at xi = {xi}")]
    NonFiniteSample { xi: f64, value: String },

    #[error("xi = {xi} is outside the covered range of the grid")]
    OutOfRange { xi: f64 },

    #[error("grid with {points} points per branch is too small for a {needed}-point stencil")]
    GridTooSmall { points: usize, needed: usize },

    #[error("Sobolev order {order} exceeds the configured maximum {max}")]
    OrderOverflow { order: f64, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The twisted invariant distribution g(lambda) does not vanish.
    #[error("twisted obstruction: |g(lambda)| = {value:e} exceeds tolerance {threshold:e}")]
    TwistObstruction { value: f64, threshold: f64 },

    /// A map-invariant distribution g(2 pi m / L) does not vanish.
    #[error(
        "map obstruction at m = {m}: |g(2 pi m / L)| = {value:e} exceeds tolerance {threshold:e}"
    )]
    MapObstruction { m: i64, value: f64, threshold: f64 },

    /// The solution fails a postcondition (residual larger than tolerance).
    #[error("residual {residual:e} exceeds tolerance {tolerance:e}: {context}")]
    Residual {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("obstruction in fiber k = {k}: {source}")]
    FiberObstruction {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("missing config field `{0}`")]
    MissingField(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
