use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cmaes::{cmaes_minimize, CmaesConfig, GenerationTrace};
use crate::error::{Error, Result};
use crate::grid::OccupancyGrid;
use crate::planner::{expected_gain, flight_waypoints, fuse_ml, Objective, OptimizerMode, PlanningContext};
use crate::trajectory::{allocate_time, plan_segments, StartState, Viewpoint, ViewpointKind};
use crate::Position;

/// Penalty per second over budget and per meter outside the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyWeights {
    pub budget: f64,
    pub envelope: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            budget: 1e3,
            envelope: 1e3,
        }
    }
}

/// A planned viewpoint list and everything needed to score variations of it.
#[derive(Debug, Clone, Copy)]
pub struct RefineRequest<'a> {
    pub viewpoints: &'a [Viewpoint],
    /// Objective each viewpoint is scored under, parallel to `viewpoints`.
    pub objectives: &'a [Objective],
    pub mode: OptimizerMode,
    pub belief: &'a OccupancyGrid,
    pub ctx: &'a PlanningContext<'a>,
    pub from: Position,
    pub budget_remaining: f64,
    pub penalties: PenaltyWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathScore {
    pub gain: f64,
    pub time_s: f64,
    pub envelope_violation_m: f64,
    pub fitness: f64,
}

impl PathScore {
    pub fn rate(&self) -> f64 {
        if self.time_s > 0.0 {
            self.gain / self.time_s
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub viewpoints: Vec<Viewpoint>,
    /// Length of the decision vector.
    pub dimension: usize,
    pub evals: usize,
    pub initial_fitness: f64,
    pub fitness: f64,
    /// False when the input plan was kept because the optimized one scored
    /// worse under [`RefineRequest::validation_score`].
    pub accepted: bool,
    pub trace: Vec<GenerationTrace>,
}

impl<'a> RefineRequest<'a> {
    /// Indices of the viewpoints the optimizer may move.
    pub fn free_indices(&self) -> Vec<usize> {
        self.viewpoints
            .iter()
            .enumerate()
            .filter(|(_, v)| match self.mode {
                OptimizerMode::None => false,
                OptimizerMode::Local => v.kind == ViewpointKind::Intermediate,
                OptimizerMode::Global => true,
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Sequentially simulated gain over leg-sum travel time, negated, plus
    /// budget and envelope penalties. Gains and times use envelope-clamped
    /// positions; the violation is measured on the raw ones.
    pub fn score(&self, positions: &[Position]) -> Result<PathScore> {
        let ctx = self.ctx;
        let mut scratch = self.belief.clone();
        let mut prev = self.from;
        let (mut gain, mut time_s, mut violation) = (0.0, 0.0, 0.0);
        for (p, objective) in positions.iter().zip(self.objectives) {
            violation += ctx.envelope.violation(p);
            let q = ctx.envelope.clamp(p);
            time_s += allocate_time(&prev, &q, &ctx.limits);
            gain += fuse_ml(&mut scratch, ctx.sensor, &ctx.thresholds, &q, *objective)?;
            prev = q;
        }
        let mut score = PathScore {
            gain,
            time_s,
            envelope_violation_m: violation,
            fitness: 0.0,
        };
        score.fitness = -score.rate()
            + self.penalties.budget * (time_s - self.budget_remaining).max(0.0)
            + self.penalties.envelope * violation;
        Ok(score)
    }

    /// Score used to accept or reject a refined plan: the expected gain of
    /// the whole measurement sequence rather than chained ML gains, charged with the minimum-snap flight time from `from` at
    /// rest when that exceeds the leg-sum estimate.
    pub fn validation_score(&self, positions: &[Position]) -> Result<PathScore> {
        let ctx = self.ctx;
        let clamped: Vec<Position> = positions.iter().map(|p| ctx.envelope.clamp(p)).collect();
        let mut s = self.score(positions)?;
        s.gain = expected_gain(
            self.belief,
            ctx.sensor,
            &ctx.thresholds,
            &clamped,
            self.objectives,
        )?;
        let waypoints = flight_waypoints(&self.from, &clamped);
        if waypoints.len() >= 2 {
            let path = plan_segments(&waypoints, &ctx.limits, &StartState::rest())?;
            s.time_s = s.time_s.max(path.travel_time());
        }
        s.fitness = -s.rate()
            + self.penalties.budget * (s.time_s - self.budget_remaining).max(0.0)
            + self.penalties.envelope * s.envelope_violation_m;
        Ok(s)
    }

    fn fitness(&self, positions: &[Position]) -> f64 {
        self.score(positions).map_or(f64::INFINITY, |s| s.fitness)
    }
}

/// Refines the free viewpoints of a plan with CMA-ES. The initial plan is
/// always evaluated, so the result never scores worse than the input.
pub fn refine_path<R: Rng + ?Sized>(
    request: &RefineRequest<'_>,
    config: &CmaesConfig,
    rng: &mut R,
) -> Result<RefineOutcome> {
    if request.objectives.len() != request.viewpoints.len() {
        return Err(Error::InvalidState(format!(
            "{} objectives for {} viewpoints",
            request.objectives.len(),
            request.viewpoints.len()
        )));
    }
    let base: Vec<Position> = request.viewpoints.iter().map(|v| v.position).collect();
    let initial_fitness = request.score(&base)?.fitness;
    let free = request.free_indices();
    if free.is_empty() {
        return Ok(RefineOutcome {
            viewpoints: request.viewpoints.to_vec(),
            dimension: 0,
            evals: 0,
            initial_fitness,
            fitness: initial_fitness,
            accepted: false,
            trace: Vec::new(),
        });
    }

    let x0: Vec<f64> = free
        .iter()
        .flat_map(|&i| base[i].iter().copied().collect::<Vec<_>>())
        .collect();
    let decode = |x: &[f64], out: &mut Vec<Position>| {
        out.clone_from(&base);
        for (slot, &i) in free.iter().enumerate() {
            out[i] = Position::new(x[3 * slot], x[3 * slot + 1], x[3 * slot + 2]);
        }
    };
    let mut buf = Vec::with_capacity(base.len());
    let outcome = cmaes_minimize(
        |x| {
            decode(x, &mut buf);
            request.fitness(&buf)
        },
        &x0,
        config,
        rng,
    )?;

    let mut best = Vec::new();
    decode(&outcome.x_best, &mut best);
    let viewpoints: Vec<Viewpoint> = request
        .viewpoints
        .iter()
        .zip(&best)
        .map(|(v, p)| Viewpoint {
            position: request.ctx.envelope.clamp(p),
            kind: v.kind,
        })
        .collect();
    let positions: Vec<Position> = viewpoints.iter().map(|v| v.position).collect();
    let fitness = request.score(&positions)?.fitness;
    let accepted = match (
        request.validation_score(&positions),
        request.validation_score(&base),
    ) {
        (Ok(new), Ok(old)) => new.fitness <= old.fitness,
        (Ok(_), Err(_)) => true,
        (Err(_), _) => false,
    };
    let (viewpoints, fitness) = if accepted {
        (viewpoints, fitness)
    } else {
        (request.viewpoints.to_vec(), initial_fitness)
    };
    Ok(RefineOutcome {
        viewpoints,
        dimension: x0.len(),
        evals: outcome.evals,
        initial_fitness,
        fitness,
        accepted,
        trace: outcome.trace,
    })
}
