use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{arr, replan, MissionObserver, PlanState, PlannerConfig, PlannerEvent, PlanningContext};
use crate::error::{Error, Result};
use crate::grid::{ClassificationThresholds, GroundTruthMap, OccupancyGrid};
use crate::harness::metrics::{MetricEvent, TrialRecord};
use crate::sensor::SensorModel;
use crate::trajectory::{plan_segments, DynamicLimits, FlightEnvelope, StartState};
use crate::Position;

// Consecutive viewpoints closer than this are flown as one.
const MERGE_M: f64 = 1e-3;

/// `from` followed by `viewpoints`, skipping any that coincide with their predecessor.
pub(crate) fn flight_waypoints(from: &Position, viewpoints: &[Position]) -> Vec<Position> {
    let mut waypoints = vec![*from];
    for v in viewpoints {
        if (v - waypoints[waypoints.len() - 1]).norm() > MERGE_M {
            waypoints.push(*v);
        }
    }
    waypoints
}

/// Independent random streams for planning decisions and sensor noise.
#[derive(Debug, Clone)]
pub struct MissionRng {
    pub planner: ChaCha8Rng,
    pub sensor: ChaCha8Rng,
}

impl MissionRng {
    pub fn new(seed: u64) -> Self {
        let mut planner = ChaCha8Rng::seed_from_u64(seed);
        planner.set_stream(1);
        let mut sensor = ChaCha8Rng::seed_from_u64(seed);
        sensor.set_stream(2);
        Self { planner, sensor }
    }
}

/// World and vehicle parameters shared by every leg of a mission.
#[derive(Debug, Clone, Copy)]
pub struct MissionParams<'a> {
    pub truth: &'a GroundTruthMap,
    pub sensor: &'a SensorModel,
    pub thresholds: ClassificationThresholds,
    pub limits: DynamicLimits,
    pub envelope: FlightEnvelope,
    pub budget_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionOutcome {
    /// Every leg was flown.
    Completed,
    /// The next leg would have ended after the budget.
    BudgetExhausted,
    /// No viewpoint differed from the current position.
    Stalled,
}

/// The vehicle and its map while a mission is flown.
#[derive(Debug, Clone)]
pub struct MissionState {
    pub belief: OccupancyGrid,
    pub elapsed_s: f64,
    pub position: Position,
    pub events: Vec<MetricEvent>,
}

impl MissionState {
    pub fn new(belief: OccupancyGrid, start: Position, params: &MissionParams<'_>) -> Result<Self> {
        if !params.envelope.contains(&start) {
            return Err(Error::InvalidState(format!(
                "start ({:.3}, {:.3}, {:.3}) lies outside the flight envelope",
                start.x, start.y, start.z
            )));
        }
        if belief.geometry() != params.truth.geometry() {
            return Err(Error::Config("belief and ground truth grids differ".into()));
        }
        let first = MetricEvent::capture(0.0, &belief, params.truth, &params.thresholds)?;
        Ok(Self {
            belief,
            elapsed_s: 0.0,
            position: start,
            events: vec![first],
        })
    }

    /// Flies from the current position (at rest) through `viewpoints`,
    /// measuring on arrival at each one. Stops before a leg that would
    /// overrun the budget.
    pub fn execute<R: Rng + ?Sized>(
        &mut self,
        params: &MissionParams<'_>,
        viewpoints: &[Position],
        rng: &mut R,
        observer: &mut dyn MissionObserver,
    ) -> Result<ExecutionOutcome> {
        let waypoints = flight_waypoints(&self.position, viewpoints);
        if waypoints.len() < 2 {
            return Ok(ExecutionOutcome::Stalled);
        }
        let path = plan_segments(&waypoints, &params.limits, &StartState::rest())?;
        for (segment, target) in path.segments.iter().zip(&waypoints[1..]) {
            let done = self.elapsed_s + segment.duration_s;
            if done > params.budget_s {
                observer.event(&PlannerEvent::BudgetStop {
                    t_s: self.elapsed_s,
                    next_leg_s: segment.duration_s,
                    budget_s: params.budget_s,
                });
                return Ok(ExecutionOutcome::BudgetExhausted);
            }
            observer.leg(self.elapsed_s, segment);
            self.elapsed_s = done;
            self.position = *target;
            self.measure(params, rng, observer)?;
        }
        Ok(ExecutionOutcome::Completed)
    }

    fn measure<R: Rng + ?Sized>(
        &mut self,
        params: &MissionParams<'_>,
        rng: &mut R,
        observer: &mut dyn MissionObserver,
    ) -> Result<()> {
        let obs = params.sensor.observe(params.truth, &self.position, rng)?;
        self.belief.fuse_all(&obs)?;
        let e = MetricEvent::capture(self.elapsed_s, &self.belief, params.truth, &params.thresholds)?;
        observer.event(&PlannerEvent::Measurement {
            t_s: e.t_s,
            position: arr(&self.position),
            cells: obs.len(),
            entropy_bits: e.entropy_bits,
            classification_rate: e.classification_rate,
            f1: e.f1,
        });
        self.events.push(e);
        Ok(())
    }

    pub fn into_record(self, seed: u64) -> TrialRecord {
        TrialRecord {
            seed,
            config_digest: String::new(),
            events: self.events,
        }
    }
}

/// Alternates replanning and full-plan execution until the budget runs out.
///
/// `seed` drives both the planner's random draws and the sensor noise, on
/// separate streams.
pub fn run_mission(
    params: &MissionParams<'_>,
    belief: OccupancyGrid,
    ctx: &PlanningContext<'_>,
    config: &PlannerConfig,
    start: Position,
    seed: u64,
    observer: &mut dyn MissionObserver,
) -> Result<TrialRecord> {
    config.validate()?;
    let mut rng = MissionRng::new(seed);
    let mut mission = MissionState::new(belief, start, params)?;
    let mut plan_state = PlanState::new(start);
    while mission.elapsed_s < params.budget_s {
        plan_state.elapsed_s = mission.elapsed_s;
        plan_state.position = mission.position;
        let plan = replan(
            &mut plan_state,
            &mission.belief,
            ctx,
            config,
            &mut rng.planner,
            observer,
        )?;
        let outcome = mission.execute(params, &plan.positions(), &mut rng.sensor, observer)?;
        if outcome != ExecutionOutcome::Completed {
            break;
        }
    }
    observer.finished(&mission.belief);
    Ok(mission.into_record(seed))
}
