use thiserror::Error;

use crate::workspace::WorkspaceError;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("time budget exhausted")]
    Timeout,
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("inconsistent task assignment: {0}")]
    Assignment(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
}
