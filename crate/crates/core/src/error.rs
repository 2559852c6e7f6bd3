use thiserror::Error;

/// Errors surfaced by the model, rate and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("anchor value must be strictly positive, got {0}")]
    NonPositiveAnchor(f64),
    #[error("channel matrix is singular (rank deficient precoding group)")]
    SingularChannel,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("start point violates a hard constraint by {violation:e}")]
    InfeasibleStart { violation: f64 },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(&'static str),
    #[error("no feasible point found (best slack {best_slack:e})")]
    Infeasible { best_slack: f64 },
    #[error("grid has {points} points, above the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },
    #[error("no grid point satisfies the constraints")]
    NoFeasibleGridPoint,
}
