use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid chart: {0}")]
    Chart(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("symplectic form is singular at z = {0:?}")]
    SingularForm(Vec<f64>),
    #[error("operation needs {needed}, structure is {actual}")]
    Variant { needed: &'static str, actual: &'static str },
    #[error("structure constants rejected: antisymmetry residual {antisymmetry:e}, Jacobi residual {jacobi:e}")]
    InvalidConstants { antisymmetry: f64, jacobi: f64 },
    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },
    #[error("guard rejected too many draws ({accepted} of {wanted} points after {draws} draws)")]
    SamplingExhausted {
        wanted: usize,
        accepted: usize,
        draws: usize,
    },
    #[error("least-squares Gram matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("coordinate map Jacobian has rank {rank} < {needed} at z = {point:?}")]
    Rank {
        rank: usize,
        needed: usize,
        point: Vec<f64>,
    },
    #[error("characteristic distributions differ (principal angles {0:?})")]
    DistributionsDiffer(Vec<f64>),
    #[error("restricted bivector is singular on the characteristic subspace")]
    SingularRestriction,
    #[error("flow left the guarded domain at t = {0}")]
    GuardExit(f64),
    #[error("flow produced a non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("unknown monitor `{0}`")]
    UnknownMonitor(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
