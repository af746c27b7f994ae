use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use ipp_core::grid::{ClassificationThresholds, GridGeometry, GroundTruthMap, OccupancyGrid};
use ipp_core::optimizer::{cmaes_minimize, CmaesConfig, PenaltyWeights, RefineRequest};
use ipp_core::planner::{build_lattice, gain, Objective, OptimizerMode, PlanningContext};
use ipp_core::sensor::SensorModel;
use ipp_core::trajectory::{plan_segments, DynamicLimits, FlightEnvelope, StartState, Viewpoint};
use ipp_core::Position;

struct World {
    belief: OccupancyGrid,
    sensor: SensorModel,
    envelope: FlightEnvelope,
}

// A 50 m map after a few real measurements.
fn world() -> World {
    let g = GridGeometry::square(50.0).unwrap();
    let truth = GroundTruthMap::generate(g, 120, 1).unwrap();
    let sensor = SensorModel::default();
    let mut belief = OccupancyGrid::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in [(12.5, 12.5, 22.5), (37.5, 12.5, 11.0), (25.0, 40.0, 8.0)] {
        let obs = sensor
            .observe(&truth, &Position::new(p.0, p.1, p.2), &mut rng)
            .unwrap();
        belief.fuse_all(&obs).unwrap();
    }
    World {
        belief,
        sensor,
        envelope: FlightEnvelope::new(&g, 2.0, 45.0).unwrap(),
    }
}

fn bench_gain(c: &mut Criterion) {
    let w = world();
    let thr = ClassificationThresholds::default();
    let mut group = c.benchmark_group("gain");
    for (name, alt) in [("low", 5.0), ("high", 40.0)] {
        let p = Position::new(25.0, 25.0, alt);
        group.bench_function(format!("info_{name}"), |b| {
            b.iter(|| gain(&w.belief, &w.sensor, &thr, black_box(&p), Objective::Info).unwrap())
        });
        group.bench_function(format!("classify_{name}"), |b| {
            b.iter(|| gain(&w.belief, &w.sensor, &thr, black_box(&p), Objective::Classify).unwrap())
        });
    }
    group.finish();
}

fn horizon() -> Vec<Viewpoint> {
    [
        (12.5, 12.5, 22.5),
        (20.0, 20.0, 15.0),
        (30.0, 15.0, 11.0),
        (33.0, 28.0, 9.0),
        (37.5, 37.5, 11.0),
        (25.0, 40.0, 10.0),
        (12.5, 37.5, 11.0),
    ]
    .iter()
    .enumerate()
    .map(|(i, p)| {
        let pos = Position::new(p.0, p.1, p.2);
        if i % 2 == 0 {
            Viewpoint::global(pos)
        } else {
            Viewpoint::intermediate(pos)
        }
    })
    .collect()
}

fn bench_fitness(c: &mut Criterion) {
    let w = world();
    let lattice = build_lattice(w.belief.geometry(), &w.sensor, &w.envelope, 4).unwrap();
    let ctx = PlanningContext {
        sensor: &w.sensor,
        lattice: &lattice,
        thresholds: ClassificationThresholds::default(),
        limits: DynamicLimits::default(),
        envelope: w.envelope,
    };
    let vps = horizon();
    let objectives = vec![Objective::Info; vps.len()];
    let req = RefineRequest {
        viewpoints: &vps,
        objectives: &objectives,
        mode: OptimizerMode::Global,
        belief: &w.belief,
        ctx: &ctx,
        from: Position::new(0.0, 0.0, 8.66),
        budget_remaining: 300.0,
        penalties: PenaltyWeights::default(),
    };
    let positions: Vec<Position> = vps.iter().map(|v| v.position).collect();
    c.bench_function("fitness/score_h7", |b| {
        b.iter(|| req.score(black_box(&positions)).unwrap())
    });
    c.bench_function("fitness/validation_h7", |b| {
        b.iter(|| req.validation_score(black_box(&positions)).unwrap())
    });
}

fn bench_plan_segments(c: &mut Criterion) {
    let mut waypoints = vec![Position::new(0.0, 0.0, 8.66)];
    waypoints.extend(horizon().iter().map(|v| v.position));
    let limits = DynamicLimits::default();
    c.bench_function("plan_segments/8_waypoints", |b| {
        b.iter(|| plan_segments(black_box(&waypoints), &limits, &StartState::rest()).unwrap())
    });
}

fn bench_cmaes(c: &mut Criterion) {
    let config = CmaesConfig {
        sigma0: 1.0,
        max_evals: 2000,
        ..CmaesConfig::default()
    };
    c.bench_function("cmaes/sphere_10d", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
            cmaes_minimize(sphere, &[1.0; 10], &config, &mut rng).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_gain,
    bench_fitness,
    bench_plan_segments,
    bench_cmaes
);
criterion_main!(benches);
