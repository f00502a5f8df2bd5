use thiserror::Error;

use crate::algebra::Field;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("field mismatch: {left:?} vs {right:?}")]
    FieldMismatch { left: Field, right: Field },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("component {index} must be zero for field {field:?}")]
    InvalidComponent { field: Field, index: usize },

    #[error("matrix is not unitary: |U*U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not Hermitian: |H - H*| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("need rows >= cols, got {rows}x{cols}")]
    TooFewRows { rows: usize, cols: usize },

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("unsupported real dimension {0}; expected 1, 2 or 4")]
    UnsupportedDim(usize),

    #[error("acceptance rate {rate:e} below floor {floor:e} after {proposals} proposals; use a larger epsilon schedule")]
    AcceptanceFloor {
        rate: f64,
        floor: f64,
        proposals: usize,
    },

    #[error("matrix is not in the approximation space: {0}")]
    NotMember(String),

    #[error("Lipschitz hypothesis fails: L bound {l_bound} >= 1")]
    LipschitzHypothesis { l_bound: f64 },

    #[error("n = {n} exceeds n_sigma = {n_sigma} for the angle recursion")]
    SigmaPrecondition { n: usize, n_sigma: usize },

    #[error("n_N = {n} must satisfy 1 <= n_N <= N - 1 = {max}")]
    InvalidSize { n: usize, max: usize },

    #[error("too few samples: {got} < {min}")]
    TooFewSamples { got: usize, min: usize },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
