#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod config;
pub mod error;
pub mod grid;
pub mod harness;
pub mod optimizer;
pub mod planner;
pub mod sensor;
pub mod trajectory;

pub use config::{PlannerKind, ScenarioConfig};
pub use error::{Error, Result};

/// World position in meters: x east, y north, z altitude above ground.
pub type Position = nalgebra::Vector3<f64>;
