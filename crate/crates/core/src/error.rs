use std::io;

use thiserror::Error;

/// Errors raised by the period engines and their building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fingerprint coverage mismatch: {0}")]
    Adjacency(String),

    #[error("incompatible sketches: {0}")]
    IncompatibleSketch(String),

    #[error("stream fed out of order: expected position {expected}, got {got}")]
    StreamOrder { expected: usize, got: usize },

    #[error("index {value} outside [{lo}, {hi}]")]
    Range { value: usize, lo: usize, hi: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("stream content changed between passes")]
    StreamMutation,

    #[error("declared length {declared} but {fed} bytes were fed")]
    LengthMismatch { declared: usize, fed: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
