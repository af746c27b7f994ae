//! Fixed-altitude boustrophedon coverage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, OccupancyGrid};
use crate::harness::metrics::TrialRecord;
use crate::planner::{MissionObserver, MissionParams, MissionRng, MissionState};
use crate::sensor::SensorModel;
use crate::trajectory::Viewpoint;
use crate::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassDirection {
    /// Passes run parallel to the x axis.
    AlongX,
    AlongY,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageConfig {
    pub altitude_m: f64,
    pub overlap_frac: f64,
    pub direction: PassDirection,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            altitude_m: 8.66,
            overlap_frac: 0.0,
            direction: PassDirection::AlongX,
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_m > 0.0 && self.altitude_m.is_finite()) {
            return Err(Error::Config(format!(
                "baseline altitude must be positive, got {}",
                self.altitude_m
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_frac) {
            return Err(Error::Config(format!(
                "baseline overlap must lie in [0, 1), got {}",
                self.overlap_frac
            )));
        }
        Ok(())
    }
}

/// Offsets of evenly spaced lines across `extent`, the outer ones inset by
/// `swath / 2`, no further apart than `spacing`.
pub fn pass_offsets(extent: f64, swath: f64, spacing: f64) -> Vec<f64> {
    if swath >= extent {
        return vec![extent / 2.0];
    }
    let span = extent - swath;
    let n = (span / spacing - 1e-9).ceil() as usize + 1;
    (0..n)
        .map(|i| swath / 2.0 + span * i as f64 / (n - 1) as f64)
        .collect()
}

/// Lawnmower viewpoints starting from the (min x, min y) corner.
pub fn plan_coverage(
    geometry: &GridGeometry,
    sensor: &SensorModel,
    cfg: &CoverageConfig,
) -> Result<Vec<Viewpoint>> {
    cfg.validate()?;
    let swath = sensor.footprint_side(cfg.altitude_m);
    if !(swath > 0.0) {
        return Err(Error::Config(format!(
            "swath at {} m is not positive",
            cfg.altitude_m
        )));
    }
    let spacing = swath * (1.0 - cfg.overlap_frac);
    let (across_extent, along_extent) = match cfg.direction {
        PassDirection::AlongX => (geometry.height_m, geometry.width_m),
        PassDirection::AlongY => (geometry.width_m, geometry.height_m),
    };
    let across = pass_offsets(across_extent, swath, spacing);
    let along = pass_offsets(along_extent, swath, spacing);
    let [ox, oy] = geometry.origin;
    let mut out = Vec::with_capacity(across.len() * along.len());
    for (k, a) in across.iter().enumerate() {
        let row: Box<dyn Iterator<Item = &f64>> = if k % 2 == 0 {
            Box::new(along.iter())
        } else {
            Box::new(along.iter().rev())
        };
        for s in row {
            let (x, y) = match cfg.direction {
                PassDirection::AlongX => (*s, *a),
                PassDirection::AlongY => (*a, *s),
            };
            out.push(Viewpoint::global(Position::new(ox + x, oy + y, cfg.altitude_m)));
        }
    }
    Ok(out)
}

/// Mirrors the pattern so it begins at the corner nearest `start`.
pub fn orient_toward(plan: &[Viewpoint], geometry: &GridGeometry, start: &Position) -> Vec<Viewpoint> {
    let [cx, cy] = geometry.center();
    let mirror = |v: &Viewpoint, fx: bool, fy: bool| {
        let mut p = v.position;
        if fx {
            p.x = 2.0 * cx - p.x;
        }
        if fy {
            p.y = 2.0 * cy - p.y;
        }
        Viewpoint {
            position: p,
            kind: v.kind,
        }
    };
    let Some(first) = plan.first() else {
        return Vec::new();
    };
    let (fx, fy) = [(false, false), (true, false), (false, true), (true, true)]
        .into_iter()
        .min_by(|a, b| {
            let pa = mirror(first, a.0, a.1).position;
            let pb = mirror(first, b.0, b.1).position;
            let (da, db) = ((pa - start).norm(), (pb - start).norm());
            da.total_cmp(&db)
                .then(pa.x.total_cmp(&pb.x))
                .then(pa.y.total_cmp(&pb.y))
        })
        .unwrap_or((false, false));
    plan.iter().map(|v| mirror(v, fx, fy)).collect()
}

/// Flies a fixed viewpoint list once with no replanning.
pub fn run_coverage(
    params: &MissionParams<'_>,
    belief: OccupancyGrid,
    plan: &[Viewpoint],
    start: Position,
    seed: u64,
    observer: &mut dyn MissionObserver,
) -> Result<TrialRecord> {
    let mut rng = MissionRng::new(seed);
    let mut mission = MissionState::new(belief, start, params)?;
    let positions: Vec<Position> = plan.iter().map(|v| v.position).collect();
    mission.execute(params, &positions, &mut rng.sensor, observer)?;
    observer.finished(&mission.belief);
    Ok(mission.into_record(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ClassificationThresholds, GroundTruthMap};
    use crate::trajectory::{DynamicLimits, FlightEnvelope};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn passes(plan: &[Viewpoint], direction: PassDirection) -> usize {
        let mut v: Vec<f64> = plan
            .iter()
            .map(|p| match direction {
                PassDirection::AlongX => p.position.y,
                PassDirection::AlongY => p.position.x,
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    }

    fn covers_all(plan: &[Viewpoint], g: &GridGeometry, s: &SensorModel) -> bool {
        (0..g.cell_count()).all(|cell| {
            let c = g.cell_center(cell);
            plan.iter()
                .any(|v| s.footprint_at(&v.position).unwrap().contains(c))
        })
    }

    fn path_length(plan: &[Viewpoint]) -> f64 {
        plan.windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }

    #[test]
    fn default_pattern() {
        let g = GridGeometry::square(50.0).unwrap();
        let s = SensorModel::default();
        let cfg = CoverageConfig::default();
        assert_abs_diff_eq!(s.footprint_side(8.66), 17.32, epsilon = 1e-9);
        let plan = plan_coverage(&g, &s, &cfg).unwrap();
        assert_eq!(passes(&plan, PassDirection::AlongX), 3);
        assert_eq!(plan.len(), 9);
        assert_abs_diff_eq!(plan[0].position, Position::new(8.66, 8.66, 8.66), epsilon = 1e-9);
        assert_abs_diff_eq!(plan[3].position.x, 50.0 - 8.66, epsilon = 1e-9);
        assert!(covers_all(&plan, &g, &s));
    }

    #[test]
    fn half_overlap_gives_five_passes() {
        let g = GridGeometry::square(50.0).unwrap();
        let s = SensorModel::default();
        let cfg = CoverageConfig {
            overlap_frac: 0.5,
            ..CoverageConfig::default()
        };
        let plan = plan_coverage(&g, &s, &cfg).unwrap();
        // ceil((50 - 17.32) / 8.66) + 1
        assert_eq!(passes(&plan, PassDirection::AlongX), 5);
        assert!(covers_all(&plan, &g, &s));
    }

    #[test]
    fn wide_swath_is_single_pass() {
        let g = GridGeometry::square(50.0).unwrap();
        let s = SensorModel::default();
        let cfg = CoverageConfig {
            altitude_m: 30.0,
            ..CoverageConfig::default()
        };
        let plan = plan_coverage(&g, &s, &cfg).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].position, Position::new(25.0, 25.0, 30.0));
    }

    #[test]
    fn orientation_follows_start() {
        let g = GridGeometry::square(50.0).unwrap();
        let s = SensorModel::default();
        let plan = plan_coverage(&g, &s, &CoverageConfig::default()).unwrap();
        let o = orient_toward(&plan, &g, &Position::new(50.0, 0.0, 10.0));
        assert_abs_diff_eq!(o[0].position.x, 41.34, epsilon = 1e-9);
        assert_abs_diff_eq!(o[0].position.y, 8.66, epsilon = 1e-9);
        assert_eq!(orient_toward(&plan, &g, &Position::new(0.0, 0.0, 10.0)), plan);
    }

    #[test]
    fn full_coverage_observes_every_cell() {
        let g = GridGeometry::square(50.0).unwrap();
        let s = SensorModel::default();
        let truth = GroundTruthMap::generate(g, 120, 1).unwrap();
        let params = MissionParams {
            truth: &truth,
            sensor: &s,
            thresholds: ClassificationThresholds::default(),
            limits: DynamicLimits::default(),
            envelope: FlightEnvelope::new(&g, 2.0, 45.0).unwrap(),
            budget_s: 1000.0,
        };
        let plan = plan_coverage(&g, &s, &CoverageConfig::default()).unwrap();
        let start = Position::new(0.0, 0.0, 8.66);
        let rec = run_coverage(&params, OccupancyGrid::new(g), &plan, start, 1, &mut ()).unwrap();
        assert_eq!(rec.measurement_count(), 9);
        // every cell moved off 0.5 once, so every cell's entropy dropped
        let a = s.accuracy_at(8.66).unwrap();
        let per_cell = crate::grid::cell_entropy(a);
        assert!(rec.final_event().unwrap().entropy_bits <= 2500.0 * per_cell + 1e-6);

        let short = MissionParams {
            budget_s: 20.0,
            ..params
        };
        let rec = run_coverage(&short, OccupancyGrid::new(g), &plan, start, 1, &mut ()).unwrap();
        assert!(rec.measurement_count() < 9);
        assert!(rec.events.iter().all(|e| e.t_s <= 20.0));
    }

    proptest! {
        #[test]
        fn coverage_and_monotone_length(
            side in 10.0f64..120.0,
            alt in 3.0f64..20.0,
            o1 in 0.0f64..0.9,
            o2 in 0.0f64..0.9,
            along_y in any::<bool>(),
        ) {
            let g = GridGeometry::square(side.round()).unwrap();
            let s = SensorModel::default();
            let direction = if along_y { PassDirection::AlongY } else { PassDirection::AlongX };
            let (lo, hi) = if o1 <= o2 { (o1, o2) } else { (o2, o1) };
            let mk = |overlap_frac| CoverageConfig { altitude_m: alt, overlap_frac, direction };
            let a = plan_coverage(&g, &s, &mk(lo)).unwrap();
            let b = plan_coverage(&g, &s, &mk(hi)).unwrap();
            prop_assert!(covers_all(&a, &g, &s));
            prop_assert!(path_length(&a) <= path_length(&b) + 1e-9);
        }
    }
}
