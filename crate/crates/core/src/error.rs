use thiserror::Error;

/// Errors raised by the planning and mapping primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cell index {index} out of bounds for a grid of {cells} cells")]
    CellOutOfBounds { index: usize, cells: usize },

    #[error("observation probability {0} must lie strictly inside (0, 1)")]
    InvalidObservation(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("waypoints {index} and {} coincide", index + 1)]
    DegenerateSegment { index: usize },

    #[error("trajectory normal matrix is singular near segment {segment}")]
    IllConditioned { segment: usize },

    #[error("dynamic limits still violated after {iterations} time-scaling iterations")]
    Infeasible { iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
