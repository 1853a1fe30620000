use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain ({xmin}, {xmax}) x ({ymin}, {ymax})")]
    InvalidDomain { xmin: f64, xmax: f64, ymin: f64, ymax: f64 },

    #[error("mesh needs at least one cell per axis, got nx={nx}, ny={ny}")]
    InvalidMesh { nx: usize, ny: usize },

    #[error("unsupported Lagrange degree {0} (expected 1, 2 or 3)")]
    UnsupportedDegree(usize),

    #[error("Gauss rule with {0} points per axis is out of range 1..=10")]
    QuadratureOrder(usize),

    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),

    #[error("index ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is singular (no pivot at elimination step {0})")]
    Singular(usize),

    #[error("bordered system is rank deficient: {0}")]
    RankDeficient(String),

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    InaccurateSolve { residual: f64, tol: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("Monge-Ampere solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("convergence fit needs at least two positive samples: {0}")]
    RateInput(String),
}
