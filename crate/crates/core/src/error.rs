use crate::jacobi::{EigResult, SvdResult};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index ({row}, {col}) out of range for {rows}x{cols}")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("matrix is singular to working precision at elimination step {step}")]
    SingularMatrix { step: usize },

    #[error("zero diagonal entry at row {row} of the triangular factor")]
    ZeroDiagonal { row: usize },

    #[error("matrix is rank deficient at column {step}")]
    RankDeficient { step: usize },

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("Jacobi SVD did not converge within {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize, best: Box<SvdResult> },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    EigNoConvergence { sweeps: usize, best: Box<EigResult> },

    #[error("grid coordinate ({row}, {col}) lies outside the {side}x{side} grid")]
    OffGrid { row: usize, col: usize, side: usize },

    #[error("layout does not match: {0}")]
    LayoutMismatch(String),

    #[error("deadlock: {blocked} processors waiting with no message in flight")]
    DeadlockDetected { blocked: usize },

    #[error("degenerate design for the cost-model fit: {0}")]
    DegenerateDesign(String),

    #[error("scenario outside the scaled-speedup regime: {0}")]
    OutsideScaledRegime(String),

    #[error("invalid run spec: {0}")]
    InvalidSpec(String),
}
