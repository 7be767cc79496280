use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the tracking and analytics pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box [{left}, {top}, {right}, {bottom}]")]
    InvalidBox {
        left: f64,
        top: f64,
        right: f64,
        bottom: f64,
    },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("mask dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },

    #[error("degenerate camera transform (determinant {0:e})")]
    DegenerateTransform(f64),

    #[error("invalid detection: {0}")]
    InvalidDetection(String),

    #[error("unknown class {0:?}")]
    UnknownClass(String),

    #[error("embedding dimension {found} does not match stream dimension {expected}")]
    EmbeddingDimension { expected: usize, found: usize },

    #[error("frame {got} is not after previous frame {previous}")]
    OutOfOrderFrame { previous: u64, got: u64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error reflects a broken invariant (ordering, registry) rather
    /// than malformed input. The CLI maps the former to exit code 2.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::OutOfOrderFrame { .. } | Error::UnknownClass(_) | Error::EmbeddingDimension { .. }
        )
    }
}
