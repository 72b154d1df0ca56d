use thiserror::Error;

use crate::stage_solver::StageStatus;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    /// No prescription satisfying the stage fixed point was found.
    #[error("no fixed point at stage {stage} (status {status:?}) for belief {belief:?}")]
    NoFixedPoint {
        stage: usize,
        belief: Vec<f64>,
        status: StageStatus,
    },
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("exhaustive enumeration refused: {required} terms exceed the limit of {limit}")]
    EnumerationLimit { required: f64, limit: f64 },
    #[error("stage {0} is outside the solved horizon")]
    StageOutOfRange(usize),
}

impl SolveError {
    /// True for refusals caused by size budgets rather than by the game itself.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            SolveError::ResourceLimit(_) | SolveError::EnumerationLimit { .. }
        )
    }
}
