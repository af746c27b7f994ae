//! Continuous refinement of planned viewpoints.

mod cmaes;
mod refine;

pub use cmaes::{cmaes_minimize, CmaesConfig, CmaesOutcome, GenerationTrace, Termination};
pub use refine::{refine_path, PathScore, PenaltyWeights, RefineOutcome, RefineRequest};
