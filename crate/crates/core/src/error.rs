use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Numeric payloads are stored as `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid mass system: {0}")]
    InvalidMassSystem(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("configuration has a collision (bodies {i} and {j})")]
    Collision { i: usize, j: usize },

    #[error("total collision at the origin (I = 0)")]
    TotalCollision,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("minimization requires dimension >= 2, got {dim}")]
    UnsupportedDimension { dim: usize },

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("all starts trapped near a collision (min separation {min_separation:e})")]
    CollisionTrapped { min_separation: f64 },

    #[error("degenerate endpoints: the free-time infimum is not attained when x = y")]
    DegenerateEndpoints,

    #[error("integration stopped near a collision at t = {time} (min separation {min_separation:e})")]
    CollisionApproach { time: f64, min_separation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
