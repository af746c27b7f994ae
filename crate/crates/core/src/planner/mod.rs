//! Fixed-horizon adaptive replanning.
//!
//! Each replanning round greedily picks global viewpoints from a
//! multiresolution lattice by gain rate, simulating an ML measurement after
//! every pick so later picks see the predicted map. A midpoint is inserted
//! between consecutive global viewpoints, and the resulting list is handed to
//! the CMA-ES refinement stage.

mod gain;
mod lattice;
mod mission;

pub use gain::{classify_gain, expected_gain, fuse_ml, gain, info_gain, Objective};
pub use lattice::{build_lattice, Lattice, LatticeLevel};
pub(crate) use mission::flight_waypoints;
pub use mission::{run_mission, ExecutionOutcome, MissionParams, MissionRng, MissionState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ClassificationThresholds, OccupancyGrid};
use crate::optimizer::{refine_path, CmaesConfig, PenaltyWeights, RefineRequest};
use crate::sensor::SensorModel;
use crate::trajectory::{
    allocate_time, DynamicLimits, FlightEnvelope, PolynomialSegment, Viewpoint, ViewpointKind,
};
use crate::Position;

const COINCIDENT_M: f64 = 1e-9;
const RATE_TIE_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    Info,
    Classify,
    /// Pick the info objective with probability `1 - elapsed / budget`.
    TimeVarying,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerMode {
    None,
    /// Refine intermediate viewpoints only.
    Local,
    /// Refine every planned viewpoint.
    Global,
}

/// Everything selection needs besides the belief map.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub sensor: &'a SensorModel,
    pub lattice: &'a Lattice,
    pub thresholds: ClassificationThresholds,
    pub limits: DynamicLimits,
    pub envelope: FlightEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Viewpoints per plan, global and intermediate combined.
    pub horizon: usize,
    pub budget_s: f64,
    pub objective_mode: ObjectiveMode,
    pub optimizer_mode: OptimizerMode,
    pub cmaes: CmaesConfig,
    pub penalties: PenaltyWeights,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 7,
            budget_s: 300.0,
            objective_mode: ObjectiveMode::TimeVarying,
            optimizer_mode: OptimizerMode::Local,
            cmaes: CmaesConfig::default(),
            penalties: PenaltyWeights::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.budget_s > 0.0 && self.budget_s.is_finite()) {
            return Err(Error::Config(format!(
                "budget must be positive, got {}",
                self.budget_s
            )));
        }
        self.cmaes.validate()
    }
}

/// Planner-side view of the mission between replanning rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanState {
    pub elapsed_s: f64,
    pub position: Position,
    pub global_vps: Vec<Viewpoint>,
    pub intermediate_vps: Vec<Viewpoint>,
    /// Lattice points chosen so far in the mission.
    pub visited: Vec<Position>,
    pub replans: usize,
}

impl PlanState {
    pub fn new(start: Position) -> Self {
        Self {
            elapsed_s: 0.0,
            position: start,
            global_vps: Vec::new(),
            intermediate_vps: Vec::new(),
            visited: Vec::new(),
            replans: 0,
        }
    }
}

/// Ordered viewpoints of one plan with the objective each was scored under.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub viewpoints: Vec<Viewpoint>,
    pub objectives: Vec<Objective>,
}

impl Plan {
    pub fn positions(&self) -> Vec<Position> {
        self.viewpoints.iter().map(|v| v.position).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub position: Position,
    pub lattice_index: usize,
    pub gain: f64,
    pub rate: f64,
    pub objective: Objective,
    /// True when no candidate had positive gain.
    pub fallback: bool,
}

/// Inputs and result of one `select_viewpoint` call, for observers.
#[derive(Debug)]
pub struct SelectionRecord<'a> {
    pub belief: &'a OccupancyGrid,
    pub from: Position,
    pub visited: &'a [Position],
    pub selection: &'a Selection,
}

/// Decision log entries, one JSON object per line when serialized.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PlannerEvent {
    Replan {
        replan: usize,
        t_s: f64,
        position: [f64; 3],
    },
    Select {
        replan: usize,
        virtual_t_s: f64,
        objective: Objective,
        position: [f64; 3],
        gain: f64,
        rate: f64,
        fallback: bool,
    },
    CmaesGeneration {
        replan: usize,
        generation: usize,
        evals: usize,
        best_fitness: f64,
        sigma: f64,
    },
    Refined {
        replan: usize,
        mode: OptimizerMode,
        dimension: usize,
        evals: usize,
        initial_fitness: f64,
        fitness: f64,
        accepted: bool,
    },
    Measurement {
        t_s: f64,
        position: [f64; 3],
        cells: usize,
        entropy_bits: f64,
        classification_rate: f64,
        f1: f64,
    },
    BudgetStop {
        t_s: f64,
        next_leg_s: f64,
        budget_s: f64,
    },
}

/// Hooks into a running mission. All methods default to no-ops.
pub trait MissionObserver {
    fn event(&mut self, _event: &PlannerEvent) {}
    fn selection(&mut self, _record: &SelectionRecord<'_>) {}
    /// A trajectory segment about to be flown, starting at mission time `t_start`.
    fn leg(&mut self, _t_start: f64, _segment: &PolynomialSegment) {}
    fn finished(&mut self, _belief: &OccupancyGrid) {}
}

impl MissionObserver for () {}

impl MissionObserver for Vec<PlannerEvent> {
    fn event(&mut self, event: &PlannerEvent) {
        self.push(event.clone());
    }
}

pub(crate) fn arr(p: &Position) -> [f64; 3] {
    [p.x, p.y, p.z]
}

/// Line 3 of the replanning loop: info when `elapsed / budget < u ~ U[0, 1)`.
pub fn choose_objective<R: Rng + ?Sized>(
    mode: ObjectiveMode,
    elapsed_s: f64,
    budget_s: f64,
    rng: &mut R,
) -> Objective {
    match mode {
        ObjectiveMode::Info => Objective::Info,
        ObjectiveMode::Classify => Objective::Classify,
        ObjectiveMode::TimeVarying => {
            let u: f64 = rng.random();
            if elapsed_s / budget_s < u {
                Objective::Info
            } else {
                Objective::Classify
            }
        }
    }
}

/// Midpoint of two viewpoints, clamped into the envelope.
pub fn insert_intermediate(prev: &Viewpoint, next: &Viewpoint, envelope: &FlightEnvelope) -> Viewpoint {
    let mid = 0.5 * (prev.position + next.position);
    Viewpoint::intermediate(envelope.clamp(&mid))
}

fn ties_before(a: &Position, b: &Position) -> bool {
    (a.z, a.x, a.y) < (b.z, b.x, b.y)
}

/// Lattice point with the highest gain per unit travel time from `from`.
///
/// Rates within a relative 1e-9 count as tied and go to the lower point, then
/// the lexicographically smaller (x, y). If nothing has positive gain, falls
/// back to the nearest unvisited point on the lowest level.
pub fn select_viewpoint(
    belief: &OccupancyGrid,
    ctx: &PlanningContext<'_>,
    objective: Objective,
    from: &Position,
    visited: &[Position],
) -> Result<Selection> {
    if ctx.lattice.is_empty() {
        return Err(Error::InvalidState("candidate lattice is empty".into()));
    }
    let mut best: Option<Selection> = None;
    for (idx, p) in ctx.lattice.points.iter().enumerate() {
        if (p - from).norm() <= COINCIDENT_M {
            continue;
        }
        let g = gain(belief, ctx.sensor, &ctx.thresholds, p, objective)?;
        let rate = g / allocate_time(from, p, &ctx.limits);
        let better = match &best {
            None => true,
            Some(b) => {
                let tol = RATE_TIE_REL * rate.abs().max(b.rate.abs());
                if (rate - b.rate).abs() <= tol {
                    ties_before(p, &b.position)
                } else {
                    rate > b.rate
                }
            }
        };
        if better {
            best = Some(Selection {
                position: *p,
                lattice_index: idx,
                gain: g,
                rate,
                objective,
                fallback: false,
            });
        }
    }
    match best {
        Some(b) if b.gain > 0.0 => Ok(b),
        _ => fallback_viewpoint(ctx, objective, from, visited),
    }
}

fn fallback_viewpoint(
    ctx: &PlanningContext<'_>,
    objective: Objective,
    from: &Position,
    visited: &[Position],
) -> Result<Selection> {
    let lowest = ctx.lattice.lowest_altitude().unwrap_or(f64::NAN);
    let seen = |p: &Position| visited.iter().any(|v| (v - p).norm() <= COINCIDENT_M);
    let candidates: Vec<(usize, &Position)> = ctx
        .lattice
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.z == lowest && (*p - from).norm() > COINCIDENT_M)
        .collect();
    let unvisited: Vec<(usize, &Position)> = candidates.iter().copied().filter(|(_, p)| !seen(p)).collect();
    let pool = if unvisited.is_empty() {
        &candidates
    } else {
        &unvisited
    };
    let (idx, p) = pool
        .iter()
        .copied()
        .min_by(|(_, a), (_, b)| {
            let (da, db) = ((*a - from).norm(), (*b - from).norm());
            da.total_cmp(&db)
                .then(a.x.total_cmp(&b.x))
                .then(a.y.total_cmp(&b.y))
        })
        .ok_or_else(|| Error::InvalidState("no lattice point differs from the current position".into()))?;
    Ok(Selection {
        position: *p,
        lattice_index: idx,
        gain: 0.0,
        rate: 0.0,
        objective,
        fallback: true,
    })
}

/// One replanning round: greedy selection up to the horizon, then refinement.
pub fn replan<R: Rng + ?Sized>(
    state: &mut PlanState,
    belief: &OccupancyGrid,
    ctx: &PlanningContext<'_>,
    config: &PlannerConfig,
    rng: &mut R,
    observer: &mut dyn MissionObserver,
) -> Result<Plan> {
    if !(state.elapsed_s < config.budget_s) {
        return Err(Error::InvalidState(format!(
            "cannot replan at t={} with budget {}",
            state.elapsed_s, config.budget_s
        )));
    }
    let replan_id = state.replans;
    state.replans += 1;
    observer.event(&PlannerEvent::Replan {
        replan: replan_id,
        t_s: state.elapsed_s,
        position: arr(&state.position),
    });

    let mut scratch = belief.clone();
    let mut clock = state.elapsed_s;
    let mut from = state.position;
    let mut viewpoints: Vec<Viewpoint> = Vec::with_capacity(config.horizon);
    let mut objectives = Vec::with_capacity(config.horizon);
    let mut last_global: Option<Viewpoint> = None;

    while viewpoints.len() < config.horizon {
        let objective = choose_objective(config.objective_mode, clock, config.budget_s, rng);
        let selection = select_viewpoint(&scratch, ctx, objective, &from, &state.visited)?;
        observer.selection(&SelectionRecord {
            belief: &scratch,
            from,
            visited: &state.visited,
            selection: &selection,
        });
        observer.event(&PlannerEvent::Select {
            replan: replan_id,
            virtual_t_s: clock,
            objective,
            position: arr(&selection.position),
            gain: selection.gain,
            rate: selection.rate,
            fallback: selection.fallback,
        });
        fuse_ml(
            &mut scratch,
            ctx.sensor,
            &ctx.thresholds,
            &selection.position,
            objective,
        )?;
        clock += allocate_time(&from, &selection.position, &ctx.limits);

        let global = Viewpoint::global(selection.position);
        if let Some(prev) = last_global {
            if viewpoints.len() + 2 <= config.horizon {
                viewpoints.push(insert_intermediate(&prev, &global, &ctx.envelope));
                objectives.push(objective);
            }
        }
        viewpoints.push(global);
        objectives.push(objective);
        state.visited.push(selection.position);
        last_global = Some(global);
        from = selection.position;
    }

    if config.optimizer_mode != OptimizerMode::None {
        let request = RefineRequest {
            viewpoints: &viewpoints,
            objectives: &objectives,
            mode: config.optimizer_mode,
            belief,
            ctx,
            from: state.position,
            budget_remaining: config.budget_s - state.elapsed_s,
            penalties: config.penalties,
        };
        let outcome = refine_path(&request, &config.cmaes, rng)?;
        for g in &outcome.trace {
            observer.event(&PlannerEvent::CmaesGeneration {
                replan: replan_id,
                generation: g.generation,
                evals: g.evals,
                best_fitness: g.best_fitness,
                sigma: g.sigma,
            });
        }
        observer.event(&PlannerEvent::Refined {
            replan: replan_id,
            mode: config.optimizer_mode,
            dimension: outcome.dimension,
            evals: outcome.evals,
            initial_fitness: outcome.initial_fitness,
            fitness: outcome.fitness,
            accepted: outcome.accepted,
        });
        viewpoints = outcome.viewpoints;
    }

    state.global_vps = viewpoints
        .iter()
        .filter(|v| v.kind == ViewpointKind::Global)
        .copied()
        .collect();
    state.intermediate_vps = viewpoints
        .iter()
        .filter(|v| v.kind == ViewpointKind::Intermediate)
        .copied()
        .collect();
    Ok(Plan {
        viewpoints,
        objectives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct World {
        geometry: GridGeometry,
        sensor: SensorModel,
        lattice: Lattice,
        envelope: FlightEnvelope,
    }

    fn world(levels: usize) -> World {
        let geometry = GridGeometry::square(50.0).unwrap();
        let sensor = SensorModel::default();
        let envelope = FlightEnvelope::new(&geometry, 2.0, 45.0).unwrap();
        let lattice = build_lattice(&geometry, &sensor, &envelope, levels).unwrap();
        World {
            geometry,
            sensor,
            lattice,
            envelope,
        }
    }

    fn ctx(w: &World) -> PlanningContext<'_> {
        PlanningContext {
            sensor: &w.sensor,
            lattice: &w.lattice,
            thresholds: ClassificationThresholds::default(),
            limits: DynamicLimits::default(),
            envelope: w.envelope,
        }
    }

    #[test]
    fn fresh_map_prefers_mid_altitude() {
        let w = world(4);
        let belief = OccupancyGrid::new(w.geometry);
        let start = Position::new(25.0, 25.0, 45.0);
        let s = select_viewpoint(&belief, &ctx(&w), Objective::Info, &start, &[]).unwrap();
        assert!(s.position.z < 45.0);
        assert!(!s.fallback);
        // exhaustive check
        let c = ctx(&w);
        let best = w
            .lattice
            .points
            .iter()
            .filter(|p| (*p - start).norm() > 1e-9)
            .map(|p| info_gain(&belief, &w.sensor, p).unwrap() / allocate_time(&start, p, &c.limits))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((s.rate - best).abs() <= 1e-9 * best);
    }

    #[test]
    fn single_point_lattice() {
        let w = world(1);
        let belief = OccupancyGrid::new(w.geometry);
        let from = Position::new(10.0, 10.0, 10.0);
        let s = select_viewpoint(&belief, &ctx(&w), Objective::Info, &from, &[]).unwrap();
        assert_eq!(s.position, Position::new(25.0, 25.0, 45.0));
        assert!(s.fallback);
    }

    #[test]
    fn equal_gain_nearer_wins() {
        let geometry = GridGeometry::square(50.0).unwrap();
        let sensor = SensorModel::default();
        let envelope = FlightEnvelope::new(&geometry, 2.0, 45.0).unwrap();
        let lattice = Lattice {
            levels: vec![],
            points: vec![Position::new(40.0, 10.0, 5.0), Position::new(12.0, 10.0, 5.0)],
        };
        let c = PlanningContext {
            sensor: &sensor,
            lattice: &lattice,
            thresholds: ClassificationThresholds::default(),
            limits: DynamicLimits::default(),
            envelope,
        };
        let belief = OccupancyGrid::new(geometry);
        let s = select_viewpoint(&belief, &c, Objective::Info, &Position::new(5.0, 10.0, 5.0), &[]).unwrap();
        assert_eq!(s.lattice_index, 1);
    }

    #[test]
    fn degenerate_sensor_falls_back() {
        let geometry = GridGeometry::square(50.0).unwrap();
        // accuracy is at the floor everywhere on the lattice
        let sensor = SensorModel::new(std::f64::consts::FRAC_PI_4, 0.5, 0.51, 0.1, 0.2).unwrap();
        let envelope = FlightEnvelope::new(&geometry, 2.0, 45.0).unwrap();
        let lattice = build_lattice(&geometry, &sensor, &envelope, 3).unwrap();
        let c = PlanningContext {
            sensor: &sensor,
            lattice: &lattice,
            thresholds: ClassificationThresholds::default(),
            limits: DynamicLimits::default(),
            envelope,
        };
        let belief = OccupancyGrid::new(geometry);
        let from = Position::new(25.0, 25.0, 45.0);
        let first = select_viewpoint(&belief, &c, Objective::Info, &from, &[]).unwrap();
        assert!(first.fallback);
        assert_eq!(first.position.z, 11.25);
        let second =
            select_viewpoint(&belief, &c, Objective::Info, &first.position, &[first.position]).unwrap();
        assert!(second.fallback);
        assert_ne!(second.position, first.position);
    }

    #[test]
    fn time_varying_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(
                choose_objective(ObjectiveMode::TimeVarying, 0.0, 300.0, &mut rng),
                Objective::Info
            );
            assert_eq!(
                choose_objective(ObjectiveMode::TimeVarying, 300.0, 300.0, &mut rng),
                Objective::Classify
            );
        }
        let n = 10_000;
        let info = (0..n)
            .filter(|_| {
                choose_objective(ObjectiveMode::TimeVarying, 90.0, 300.0, &mut rng) == Objective::Info
            })
            .count();
        let frac = info as f64 / n as f64;
        assert!((frac - 0.7).abs() <= 0.015, "info fraction {frac}");
        assert_eq!(
            choose_objective(ObjectiveMode::Classify, 0.0, 300.0, &mut rng),
            Objective::Classify
        );
    }

    #[test]
    fn intermediate_is_clamped_midpoint() {
        let w = world(1);
        let a = Viewpoint::global(Position::new(0.0, 0.0, 10.0));
        let b = Viewpoint::global(Position::new(10.0, 10.0, 20.0));
        let m = insert_intermediate(&a, &b, &w.envelope);
        assert_eq!(m.position, Position::new(5.0, 5.0, 15.0));
        assert_eq!(m.kind, ViewpointKind::Intermediate);
        let env = FlightEnvelope::new(&w.geometry, 12.0, 45.0).unwrap();
        assert_eq!(insert_intermediate(&a, &b, &env).position.z, 15.0);
        let low = Viewpoint::global(Position::new(10.0, 10.0, 12.0));
        assert_eq!(insert_intermediate(&a, &low, &env).position.z, 12.0);
    }

    #[test]
    fn replan_alternates_global_and_intermediate() {
        let w = world(4);
        let c = ctx(&w);
        let belief = OccupancyGrid::new(w.geometry);
        let config = PlannerConfig {
            optimizer_mode: OptimizerMode::None,
            ..PlannerConfig::default()
        };
        let mut state = PlanState::new(Position::new(25.0, 25.0, 45.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let before = belief.clone();
        let plan = replan(&mut state, &belief, &c, &config, &mut rng, &mut ()).unwrap();
        assert_eq!(belief, before);
        let kinds: Vec<ViewpointKind> = plan.viewpoints.iter().map(|v| v.kind).collect();
        use ViewpointKind::*;
        assert_eq!(
            kinds,
            vec![
                Global,
                Intermediate,
                Global,
                Intermediate,
                Global,
                Intermediate,
                Global
            ]
        );
        assert_eq!(state.global_vps.len(), 4);
        assert_eq!(state.intermediate_vps.len(), 3);

        for horizon in 1..6 {
            let cfg = PlannerConfig {
                horizon,
                ..config.clone()
            };
            let mut st = PlanState::new(Position::new(25.0, 25.0, 45.0));
            let plan = replan(&mut st, &belief, &c, &cfg, &mut rng, &mut ()).unwrap();
            assert_eq!(plan.viewpoints.len(), horizon);
        }
    }

    #[test]
    fn replan_refuses_spent_budget() {
        let w = world(2);
        let c = ctx(&w);
        let mut state = PlanState::new(Position::new(25.0, 25.0, 45.0));
        state.elapsed_s = 300.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = replan(
            &mut state,
            &OccupancyGrid::new(w.geometry),
            &c,
            &PlannerConfig::default(),
            &mut rng,
            &mut (),
        );
        assert!(r.is_err());
    }
}
