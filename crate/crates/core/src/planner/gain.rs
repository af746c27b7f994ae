//! Objective functions scored on simulated maximum-likelihood measurements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{logit, logodds_entropy, ClassificationThresholds, OccupancyGrid};
use crate::sensor::SensorModel;
use crate::Position;

/// Global viewpoint selection objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Map entropy reduction, in bits.
    Info,
    /// Reduction of the unclassified cell count.
    Classify,
}

/// Entropy reduction from fusing the ML observation at `candidate`.
pub fn info_gain(belief: &OccupancyGrid, sensor: &SensorModel, candidate: &Position) -> Result<f64> {
    let thr = ClassificationThresholds::default();
    score(belief, sensor, &thr, candidate, Objective::Info, None)
}

/// Shrinkage of the unclassified set from fusing the ML observation at `candidate`.
pub fn classify_gain(
    belief: &OccupancyGrid,
    sensor: &SensorModel,
    thr: &ClassificationThresholds,
    candidate: &Position,
) -> Result<i64> {
    score(belief, sensor, thr, candidate, Objective::Classify, None).map(|g| g as i64)
}

/// Gain of `candidate` under `objective`, as a real number.
pub fn gain(
    belief: &OccupancyGrid,
    sensor: &SensorModel,
    thr: &ClassificationThresholds,
    candidate: &Position,
    objective: Objective,
) -> Result<f64> {
    score(belief, sensor, thr, candidate, objective, None)
}

/// Fuses the ML observation at `position` into `belief` and returns its gain.
pub fn fuse_ml(
    belief: &mut OccupancyGrid,
    sensor: &SensorModel,
    thr: &ClassificationThresholds,
    position: &Position,
    objective: Objective,
) -> Result<f64> {
    let mut updates = Vec::new();
    let g = score(belief, sensor, thr, position, objective, Some(&mut updates))?;
    for (cell, l) in updates {
        belief.set_logodds(cell, l);
    }
    Ok(g)
}

/// Expected gain of real measurements at every position in order, under the
/// current belief. Each cell's label and every combination of sensor outcomes
/// over the viewpoints that see it are enumerated, so overlapping viewpoints
/// are credited exactly rather than through an assumed outcome. Each
/// viewpoint's share is scored under its own objective.
pub fn expected_gain(
    belief: &OccupancyGrid,
    sensor: &SensorModel,
    thr: &ClassificationThresholds,
    positions: &[Position],
    objectives: &[Objective],
) -> Result<f64> {
    if positions.len() != objectives.len() {
        return Err(Error::InvalidState(format!(
            "{} objectives for {} positions",
            objectives.len(),
            positions.len()
        )));
    }
    // (cell, viewpoint) pairs in viewpoint order
    let mut seen: Vec<(usize, usize)> = Vec::new();
    let mut steps = Vec::with_capacity(positions.len());
    for (j, p) in positions.iter().enumerate() {
        let a = sensor.accuracy_at(p.z)?;
        steps.push((logit(a), logit(1.0 - a), a));
        seen.extend(sensor.footprint_at(p)?.cells(belief.geometry()).map(|c| (c, j)));
    }
    seen.sort_unstable();
    let walk = Walk {
        steps: &steps,
        objectives,
        bound: belief.clamp(),
        bounds: thr.logodds_bounds(),
    };
    let mut total = 0.0;
    let mut chain = Vec::with_capacity(positions.len());
    for group in seen.chunk_by(|x, y| x.0 == y.0) {
        let cell = group[0].0;
        chain.clear();
        chain.extend(group.iter().map(|&(_, j)| j));
        let p = belief.probability(cell);
        total += walk.descend(&chain, belief.logodds(cell), p, 1.0 - p);
    }
    Ok(total)
}

struct Walk<'a> {
    // (weed-label step, free-label step, accuracy) per viewpoint
    steps: &'a [(f64, f64, f64)],
    objectives: &'a [Objective],
    bound: f64,
    bounds: (f64, f64),
}

impl Walk<'_> {
    fn value(&self, objective: Objective, l: f64) -> f64 {
        match objective {
            Objective::Info => logodds_entropy(l),
            Objective::Classify => f64::from(u8::from(self.bounds.0 < l && l < self.bounds.1)),
        }
    }

    // Expected value reduction over the remaining chain; `pw`/`pf` are the
    // joint probabilities of the outcomes so far with a weed/free cell.
    fn descend(&self, chain: &[usize], l: f64, pw: f64, pf: f64) -> f64 {
        let Some((&j, rest)) = chain.split_first() else {
            return 0.0;
        };
        let (up, down, a) = self.steps[j];
        let o = self.objectives[j];
        let before = self.value(o, l);
        let mut total = 0.0;
        // weed label: seen with prob a on a weed cell, 1 - a on a free one
        for (step, qw, qf) in [(up, a, 1.0 - a), (down, 1.0 - a, a)] {
            let (w, f) = (pw * qw, pf * qf);
            let mass = w + f;
            if mass == 0.0 {
                continue;
            }
            let next = (l + step).clamp(-self.bound, self.bound);
            total += mass * (before - self.value(o, next)) + self.descend(rest, next, w, f);
        }
        total
    }
}

// Single pass over the footprint. Per-cell updates mirror `OccupancyGrid::fuse`
// with the observation `simulate_ml_observation` would emit.
fn score(
    belief: &OccupancyGrid,
    sensor: &SensorModel,
    thr: &ClassificationThresholds,
    position: &Position,
    objective: Objective,
    mut updates: Option<&mut Vec<(usize, f64)>>,
) -> Result<f64> {
    let a = sensor.accuracy_at(position.z)?;
    let footprint = sensor.footprint_at(position)?;
    let (step_weed, step_free) = (logit(a), logit(1.0 - a));
    let bound = belief.clamp();
    let (lo, hi) = thr.logodds_bounds();
    let mut total = 0.0;
    let mut classified = 0i64;
    for cell in footprint.cells(belief.geometry()) {
        let l = belief.logodds(cell);
        let step = if l >= 0.0 { step_weed } else { step_free };
        let next = (l + step).clamp(-bound, bound);
        match objective {
            Objective::Info => total += logodds_entropy(l) - logodds_entropy(next),
            Objective::Classify => {
                let before = lo < l && l < hi;
                let after = lo < next && next < hi;
                classified += i64::from(before) - i64::from(after);
            }
        }
        if let Some(u) = updates.as_deref_mut() {
            u.push((cell, next));
        }
    }
    Ok(match objective {
        Objective::Info => total,
        Objective::Classify => classified as f64,
    })
}
