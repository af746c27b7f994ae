//! Down-looking camera with a square footprint and an altitude-dependent
//! classifier accuracy.
//!
//! Accuracy is flat at `accuracy_ceiling` up to `h_min`, then falls linearly to
//! `accuracy_floor` at `h_max` and stays there. Confusion is symmetric: both
//! error rates equal `1 - accuracy`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, GroundTruthMap, OccupancyGrid};
use crate::Position;

/// Likelihood that `cell` holds a weed, as reported by one classifier pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub cell: usize,
    pub p_obs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub half_angle_rad: f64,
    pub accuracy_floor: f64,
    pub accuracy_ceiling: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            half_angle_rad: std::f64::consts::FRAC_PI_4,
            accuracy_floor: 0.5,
            accuracy_ceiling: 0.95,
            h_min: 2.0,
            h_max: 45.0,
        }
    }
}

impl SensorModel {
    pub fn new(
        half_angle_rad: f64,
        accuracy_floor: f64,
        accuracy_ceiling: f64,
        h_min: f64,
        h_max: f64,
    ) -> Result<Self> {
        let model = Self {
            half_angle_rad,
            accuracy_floor,
            accuracy_ceiling,
            h_min,
            h_max,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_angle_rad > 0.0 && self.half_angle_rad < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "half field-of-view {} rad must lie in (0, pi/2)",
                self.half_angle_rad
            )));
        }
        // A perfect classifier would emit p_obs = 1, which fusion rejects.
        if !(0.5 <= self.accuracy_floor
            && self.accuracy_floor < self.accuracy_ceiling
            && self.accuracy_ceiling < 1.0)
        {
            return Err(Error::Config(format!(
                "sensor accuracies must satisfy 0.5 <= floor ({}) < ceiling ({}) < 1",
                self.accuracy_floor, self.accuracy_ceiling
            )));
        }
        if !(0.0 < self.h_min && self.h_min < self.h_max) {
            return Err(Error::Config(format!(
                "sensor altitudes must satisfy 0 < h_min ({}) < h_max ({})",
                self.h_min, self.h_max
            )));
        }
        Ok(())
    }

    /// Probability that a single cell label is correct at `altitude`.
    pub fn accuracy_at(&self, altitude: f64) -> Result<f64> {
        if !(altitude > 0.0) {
            return Err(Error::InvalidState(format!(
                "sensor altitude must be positive, got {altitude}"
            )));
        }
        Ok(if altitude <= self.h_min {
            self.accuracy_ceiling
        } else if altitude >= self.h_max {
            self.accuracy_floor
        } else {
            let frac = (self.h_max - altitude) / (self.h_max - self.h_min);
            self.accuracy_floor + (self.accuracy_ceiling - self.accuracy_floor) * frac
        })
    }

    pub fn footprint_side(&self, altitude: f64) -> f64 {
        2.0 * altitude * self.half_angle_rad.tan()
    }

    pub fn footprint_at(&self, position: &Position) -> Result<Footprint> {
        if !(position.z > 0.0) {
            return Err(Error::InvalidState(format!(
                "sensor altitude must be positive, got {}",
                position.z
            )));
        }
        Ok(Footprint {
            center: [position.x, position.y],
            side_m: self.footprint_side(position.z),
        })
    }

    /// Noisy classifier output against the true weed field.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        truth: &GroundTruthMap,
        position: &Position,
        rng: &mut R,
    ) -> Result<Vec<Observation>> {
        let a = self.accuracy_at(position.z)?;
        let footprint = self.footprint_at(position)?;
        Ok(footprint
            .cells(truth.geometry())
            .map(|cell| {
                let correct = rng.random::<f64>() < a;
                let says_weed = truth.is_weed(cell) == correct;
                Observation {
                    cell,
                    p_obs: if says_weed { a } else { 1.0 - a },
                }
            })
            .collect())
    }

    /// Predicted observation assuming every cell shows its most likely label
    /// under `belief` (ties count as weed).
    pub fn simulate_ml_observation(
        &self,
        belief: &OccupancyGrid,
        position: &Position,
    ) -> Result<Vec<Observation>> {
        let a = self.accuracy_at(position.z)?;
        let footprint = self.footprint_at(position)?;
        Ok(footprint
            .cells(belief.geometry())
            .map(|cell| Observation {
                cell,
                p_obs: if belief.logodds(cell) >= 0.0 { a } else { 1.0 - a },
            })
            .collect())
    }
}

/// Axis-aligned square area imaged from one viewpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub center: [f64; 2],
    pub side_m: f64,
}

impl Footprint {
    /// Cells whose centers fall inside the footprint, closed on the low edge
    /// and open on the high edge. Off-map parts are dropped.
    pub fn cells(&self, geometry: &GridGeometry) -> impl Iterator<Item = usize> + '_ {
        let half = 0.5 * self.side_m;
        let cols = geometry.col_span(self.center[0] - half, self.center[0] + half);
        let rows = geometry.row_span(self.center[1] - half, self.center[1] + half);
        let stride = geometry.cols();
        rows.flat_map(move |row| cols.clone().map(move |col| row * stride + col))
    }

    pub fn contains(&self, point: [f64; 2]) -> bool {
        let half = 0.5 * self.side_m;
        (0..2).all(|k| self.center[k] - half <= point[k] && point[k] < self.center[k] + half)
    }
}
