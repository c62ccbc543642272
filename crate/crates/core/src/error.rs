//! Error type shared by every module of the simulator.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid dimension: {0}")]
    InvalidDimension(String),

    #[error("field contains non-finite values ({count} entries, first at cell {first})")]
    NonFiniteField { count: usize, first: usize },

    #[error("invalid exponent {0}: Lp needs p >= 1, W1q needs q > 1")]
    InvalidExponent(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid gaussian width sigma = {0}")]
    InvalidSigma(f64),

    #[error("invalid model parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("no homogeneous steady state: {0}")]
    NoSteadyState(String),

    #[error("source term is negative ({value}) at ({x}, {y}, t = {t})")]
    NegativeSource { value: f64, x: f64, y: f64, t: f64 },

    #[error("density is negative ({value}) at cell {cell}")]
    NegativeDensity { value: f64, cell: usize },

    #[error("degenerate diffusion with m = {m} requires eps > 0")]
    DegenerateWithoutEps { m: f64 },

    #[error("attractiveness is not positive ({value}) at cell {cell}")]
    NonPositiveV { value: f64, cell: usize },

    #[error("invalid step control: {0}")]
    InvalidControl(String),

    #[error("stable time step {dt:e} fell below dt_min = {dt_min:e}")]
    DtUnderflow { dt: f64, dt_min: f64 },

    #[error("state is not healthy ({0})")]
    UnhealthyState(String),

    #[error("invalid output times: {0}")]
    InvalidOutputTimes(String),

    #[error("diagnostics record is empty")]
    EmptyRecord,

    #[error("diagnostics record has {rows} rows, at least {needed} are required")]
    InsufficientRows { rows: usize, needed: usize },

    #[error("unsupported test function: {0}")]
    UnsupportedTestFunction(String),

    #[error("refinement study needs at least 3 grids each doubling the previous: {0}")]
    InvalidRefinement(String),

    #[error("snapshot {path}: bad magic, expected `CWF1`")]
    BadMagic { path: PathBuf },

    #[error("snapshot {path}: truncated ({detail})")]
    Truncated { path: PathBuf, detail: String },

    #[error("snapshot {path}: malformed header: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },

    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    ScenarioParse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("scenario field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("unknown convergence test `{0}`")]
    UnknownTest(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
