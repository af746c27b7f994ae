//! Trial metrics and multi-seed experiment aggregation.

pub mod metrics;
pub mod plot;
pub mod stats;

pub use metrics::{classification_rate, confusion, f1_score, Confusion, Metric, MetricEvent, TrialRecord};
pub use stats::{
    ecdf, mean_ci95, quantile, time_grid, time_to_level, AggregateSeries, EntropyCdf, PairedComparison,
    CDF_LEVELS,
};

use rayon::prelude::*;

use crate::baseline::{orient_toward, plan_coverage, run_coverage};
use crate::config::{PlannerKind, ScenarioConfig};
use crate::error::{Error, Result};
use crate::grid::{GroundTruthMap, OccupancyGrid};
use crate::planner::{run_mission, MissionObserver, MissionParams, PlanningContext};

/// Flies one mission of `planner` over the world generated from `seed`.
pub fn run_trial(
    cfg: &ScenarioConfig,
    planner: PlannerKind,
    seed: u64,
    observer: &mut dyn MissionObserver,
) -> Result<TrialRecord> {
    let geometry = cfg.geometry()?;
    let sensor = cfg.sensor_model()?;
    let truth = GroundTruthMap::generate(geometry, cfg.map.weed_count, seed)?;
    let params = MissionParams {
        truth: &truth,
        sensor: &sensor,
        thresholds: cfg.classification_thresholds()?,
        limits: cfg.limits()?,
        envelope: cfg.envelope()?,
        budget_s: cfg.planner.budget_s,
    };
    let belief = OccupancyGrid::new(geometry);
    let mut record = match planner {
        PlannerKind::Adaptive => {
            let lattice = cfg.lattice()?;
            let ctx = PlanningContext {
                sensor: &sensor,
                lattice: &lattice,
                thresholds: params.thresholds,
                limits: params.limits,
                envelope: params.envelope,
            };
            run_mission(
                &params,
                belief,
                &ctx,
                &cfg.planner_config(),
                cfg.start(),
                seed,
                observer,
            )?
        }
        PlannerKind::Lawnmower => {
            let plan = plan_coverage(&geometry, &sensor, &cfg.baseline)?;
            let plan = orient_toward(&plan, &geometry, &cfg.start());
            run_coverage(&params, belief, &plan, cfg.start(), seed, observer)?
        }
    };
    record.config_digest = cfg.with_planner(planner).digest();
    Ok(record)
}

/// Trials of one planner plus their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub planner: PlannerKind,
    /// Sorted by seed.
    pub records: Vec<TrialRecord>,
    /// One series per entry of [`Metric::ALL`].
    pub series: Vec<AggregateSeries>,
    pub entropy_cdf: EntropyCdf,
}

impl Experiment {
    pub fn series(&self, metric: Metric) -> &AggregateSeries {
        self.series
            .iter()
            .find(|s| s.metric == metric)
            .expect("every metric is aggregated")
    }

    pub fn from_records(planner: PlannerKind, mut records: Vec<TrialRecord>, bins: &[f64]) -> Result<Self> {
        records.sort_by_key(|r| r.seed);
        let series = Metric::ALL
            .iter()
            .map(|m| AggregateSeries::from_records(&records, *m, bins))
            .collect::<Result<_>>()?;
        let entropy_cdf = EntropyCdf::from_records(&records, bins)?;
        Ok(Self {
            planner,
            records,
            series,
            entropy_cdf,
        })
    }
}

/// Seeds `base_seed + k` for `k < n_trials`.
pub fn trial_seeds(cfg: &ScenarioConfig) -> Vec<u64> {
    (0..cfg.experiment.n_trials as u64)
        .map(|k| cfg.experiment.base_seed.wrapping_add(k))
        .collect()
}

/// Runs every seed on a pool of `jobs` threads.
pub fn run_seeds(
    cfg: &ScenarioConfig,
    planner: PlannerKind,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidState(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let r = run_trial(cfg, planner, seed, &mut ());
                if let Ok(rec) = &r {
                    log::debug!(
                        "{} seed {seed}: {} measurements, final entropy {:.1} bits",
                        planner.name(),
                        rec.measurement_count(),
                        rec.final_event().map_or(f64::NAN, |e| e.entropy_bits)
                    );
                }
                r
            })
            .collect()
    })
}

/// Runs `cfg.experiment.n_trials` trials and aggregates them over
/// `cfg.experiment.bin_s` bins on `[0, B]`.
pub fn run_experiment(cfg: &ScenarioConfig, planner: PlannerKind) -> Result<Experiment> {
    let records = run_seeds(cfg, planner, &trial_seeds(cfg), cfg.experiment.jobs)?;
    let bins = time_grid(cfg.planner.budget_s, cfg.experiment.bin_s);
    Experiment::from_records(planner, records, &bins)
}
