use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("{requested} modes do not fit a grid of {grid_points} points per axis (need at least {required_points})")]
    TooManyModes {
        requested: usize,
        grid_points: usize,
        required_points: usize,
    },

    #[error("point {point:?} lies outside the domain {lengths:?}")]
    OutOfDomain { point: Vec<f64>, lengths: Vec<f64> },

    #[error("field belongs to basis #{found}, expected basis #{expected}")]
    BasisMismatch { expected: u64, found: u64 },

    #[error("{0} representation is not current")]
    StaleRepresentation(&'static str),

    #[error("length mismatch for {what}: expected {expected}, got {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("inhibitor is nonpositive at node {node} (v = {value:e}) with a zero floor")]
    NonPositiveInhibitor { node: usize, value: f64 },

    #[error("reaction CFL violated at step {step}: kappa_u * max(u^2/v) * dt = {value:e} >= {bound:e}")]
    ReactionCfl { step: usize, value: f64, bound: f64 },

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error:\n{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
