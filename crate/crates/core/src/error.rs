use thiserror::Error;

/// Errors surfaced by the library. Multi-indices in messages are 1-based.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("dimension index {index} out of range for an order-{order} tensor")]
    DimensionOutOfRange { index: usize, order: usize },
    #[error("kernel {kernel:?} does not fit tensor {shape:?} (need 1 <= k_j <= m_j)")]
    InvalidKernel { kernel: Vec<usize>, shape: Vec<usize> },
    #[error(
        "refusing to allocate {entries} entries for a {rows}x{cols} convolution matrix (cap {cap}); reduce the kernel size"
    )]
    TooLarge { rows: usize, cols: usize, entries: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value at linear position {0}")]
    NonFinite(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("spectrum is not conjugate-symmetric (imaginary residue {residue:e} exceeds {limit:e})")]
    NotConjugateSymmetric { residue: f64, limit: f64 },
    #[error("malformed input ({context}): {reason}")]
    Format { context: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
