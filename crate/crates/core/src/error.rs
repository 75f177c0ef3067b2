use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("column {column} is all zeros; cosine similarity is undefined for it")]
    ZeroColumn { column: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error(
        "kernel matrix is not symmetric: max |k_ij - k_ji| = {max_abs_diff:e} at ({row}, {col})"
    )]
    Asymmetric {
        max_abs_diff: f64,
        row: usize,
        col: usize,
    },

    #[error("kernel matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e} (tolerance {tolerance:e}); enable PSD repair")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate index {0}")]
    DuplicateIndex(usize),

    #[error("factorization of lambda*K_s + rho*I failed; the kernel block is not positive semidefinite, apply psd_repair first")]
    Factorization,

    #[error("eigendecomposition did not converge")]
    Eigen,

    #[error("kernel matrix is identically zero")]
    ZeroKernel,

    #[error("representation row for sample {0} is all zeros")]
    ZeroRow(usize),

    #[error("representation matrix has no nonzero rows")]
    NoNonzeroRows,

    #[error("kernel diagonal at sample {index} is {value}; normalized similarity undefined")]
    DegenerateDiagonal { index: usize, value: f64 },

    #[error("all points are collinear")]
    Collinear,

    #[error("no representatives given")]
    NoRepresentatives,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter { .. } => ErrorClass::Usage,
            Error::Factorization | Error::Eigen | Error::NotPsd { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}
