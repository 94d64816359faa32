use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("interaction order p={p} is not supported in exact disorder mode (p <= 3); use disorder.mode = decoupled")]
    OrderTooLarge { p: usize },

    #[error("disorder tensor for p={p}, N={n} needs {entries} entries, above the limit of {limit}")]
    DisorderTooLarge {
        p: usize,
        n: usize,
        entries: u128,
        limit: u128,
    },

    #[error("operation requires exact disorder mode")]
    RequiresExactDisorder,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("blow-up at t = {time}: K_N = {k} exceeds threshold {threshold}")]
    BlowUp { time: f64, k: f64, threshold: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("observables do not carry the A/F grids (enable record_af)")]
    MissingAf,

    #[error("corrector did not converge at row {row}: residual {residual:e} after {iterations} sweeps")]
    CorrectorDiverged {
        row: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("{what} = {n} exceeds the supported maximum {max}")]
    TooLarge { what: &'static str, n: usize, max: usize },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}
