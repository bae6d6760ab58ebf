use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid terrain parameters: {0}")]
    InvalidParams(String),

    #[error("negative base {base} under the plain smoothing exponent at ({x}, {y})")]
    NegativeBase { base: f64, x: f64, y: f64 },

    #[error("point ({x:.4}, {y:.4}) lies outside the map extent")]
    OutOfBounds { x: f64, y: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("grid is not square: {rows} rows of {cols} values")]
    NonSquareGrid { rows: usize, cols: usize },

    #[error("length mismatch: {preds} predictions vs {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },

    /// Two inputs that must describe the same samples disagree.
    #[error("data mismatch: {0}")]
    DataMismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
