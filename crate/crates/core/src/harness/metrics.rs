//! Per-mission map quality metrics and the time series that records them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ClassificationThresholds, GroundTruthMap, OccupancyGrid};

/// Fraction of cells outside the unclassified set.
pub fn classification_rate(belief: &OccupancyGrid, thr: &ClassificationThresholds) -> f64 {
    if belief.is_empty() {
        return 0.0;
    }
    let total = belief.len();
    (total - belief.unclassified_count(thr)) as f64 / total as f64
}

/// Weed-positive confusion counts; a cell is predicted weed iff `p >= delta_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn f1(&self) -> f64 {
        let tp = self.true_pos as f64;
        let predicted = tp + self.false_pos as f64;
        let actual = tp + self.false_neg as f64;
        if predicted == 0.0 || actual == 0.0 {
            return 0.0;
        }
        let (precision, recall) = (tp / predicted, tp / actual);
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

pub fn confusion(
    belief: &OccupancyGrid,
    truth: &GroundTruthMap,
    thr: &ClassificationThresholds,
) -> Result<Confusion> {
    if belief.geometry() != truth.geometry() {
        return Err(Error::Config(
            "belief and ground-truth geometries differ".to_string(),
        ));
    }
    let (_, weed_bound) = thr.logodds_bounds();
    let mut c = Confusion::default();
    for (cell, &weed) in truth.cells().iter().enumerate() {
        let predicted = belief.logodds(cell) >= weed_bound;
        match (predicted, weed) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// F1 score of the weed class; 0 when nothing is predicted or present.
pub fn f1_score(
    belief: &OccupancyGrid,
    truth: &GroundTruthMap,
    thr: &ClassificationThresholds,
) -> Result<f64> {
    Ok(confusion(belief, truth, thr)?.f1())
}

/// Map metrics at one instant of a mission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEvent {
    pub t_s: f64,
    pub entropy_bits: f64,
    pub classification_rate: f64,
    pub f1: f64,
}

impl MetricEvent {
    pub fn capture(
        t_s: f64,
        belief: &OccupancyGrid,
        truth: &GroundTruthMap,
        thr: &ClassificationThresholds,
    ) -> Result<Self> {
        Ok(Self {
            t_s,
            entropy_bits: belief.entropy(),
            classification_rate: classification_rate(belief, thr),
            f1: f1_score(belief, truth, thr)?,
        })
    }
}

/// Which metric of a [`MetricEvent`] to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Entropy,
    ClassificationRate,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Entropy, Metric::ClassificationRate, Metric::F1];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Entropy => "entropy",
            Metric::ClassificationRate => "classification_rate",
            Metric::F1 => "f1",
        }
    }

    pub fn of(&self, e: &MetricEvent) -> f64 {
        match self {
            Metric::Entropy => e.entropy_bits,
            Metric::ClassificationRate => e.classification_rate,
            Metric::F1 => e.f1,
        }
    }
}

/// Time series of metrics for one simulated mission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub config_digest: String,
    /// First event is the initial map at `t = 0`; one event per measurement after that.
    pub events: Vec<MetricEvent>,
}

impl TrialRecord {
    pub fn final_event(&self) -> Option<&MetricEvent> {
        self.events.last()
    }

    /// Latest event at or before `t`; metrics are step-constant between events.
    pub fn at(&self, t: f64) -> Option<&MetricEvent> {
        let idx = self.events.partition_point(|e| e.t_s <= t);
        idx.checked_sub(1).map(|i| &self.events[i])
    }

    /// Earliest time a metric reaches `level`, if it ever does.
    pub fn first_time_reaching(&self, metric: Metric, level: f64) -> Option<f64> {
        self.events.iter().find(|e| metric.of(e) >= level).map(|e| e.t_s)
    }

    pub fn measurement_count(&self) -> usize {
        self.events.len().saturating_sub(1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,entropy_bits,classification_rate,f1\n");
        for e in &self.events {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6}\n",
                e.t_s, e.entropy_bits, e.classification_rate, e.f1
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn thr() -> ClassificationThresholds {
        ClassificationThresholds::default()
    }

    #[test]
    fn classification_rate_examples() {
        let g = GridGeometry::square(50.0).unwrap();
        let mut b = OccupancyGrid::new(g);
        assert_eq!(classification_rate(&b, &thr()), 0.0);
        for cell in 500..2500 {
            b.set_probability(cell, if cell % 2 == 0 { 0.05 } else { 0.95 })
                .unwrap();
        }
        assert_eq!(classification_rate(&b, &thr()), 0.8);
        let u = b.unclassified_count(&thr()) as f64 / b.len() as f64;
        assert_eq!(classification_rate(&b, &thr()) + u, 1.0);
        for cell in 0..500 {
            b.set_probability(cell, 0.95).unwrap();
        }
        assert_eq!(classification_rate(&b, &thr()), 1.0);
    }

    #[test]
    fn f1_examples() {
        let g = GridGeometry::square(20.0).unwrap();
        let truth = GroundTruthMap::generate(g, 40, 5).unwrap();
        let mut perfect = OccupancyGrid::new(g);
        for cell in 0..g.cell_count() {
            let p = if truth.is_weed(cell) { 0.95 } else { 0.05 };
            perfect.set_probability(cell, p).unwrap();
        }
        assert_eq!(f1_score(&perfect, &truth, &thr()).unwrap(), 1.0);
        assert_eq!(f1_score(&OccupancyGrid::new(g), &truth, &thr()).unwrap(), 0.0);

        let c = Confusion {
            true_pos: 90,
            false_pos: 30,
            false_neg: 30,
        };
        assert!((c.f1() - 0.75).abs() < 1e-12);

        let other = GridGeometry::square(10.0).unwrap();
        assert!(f1_score(&OccupancyGrid::new(other), &truth, &thr()).is_err());
    }

    #[test]
    fn f1_matches_enumeration_oracle() {
        let g = GridGeometry::square(15.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50 {
            let truth = GroundTruthMap::generate(g, rng.random_range(0..60), trial).unwrap();
            let mut belief = OccupancyGrid::new(g);
            for cell in 0..g.cell_count() {
                belief
                    .set_probability(cell, rng.random_range(0.01..0.99))
                    .unwrap();
            }
            let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
            for cell in 0..g.cell_count() {
                let pred = belief.probability(cell) >= 0.75;
                let actual = truth.is_weed(cell);
                tp += f64::from(u8::from(pred && actual));
                fp += f64::from(u8::from(pred && !actual));
                fn_ += f64::from(u8::from(!pred && actual));
            }
            let expect = if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            };
            let got = f1_score(&belief, &truth, &thr()).unwrap();
            assert!((got - expect).abs() < 1e-12, "trial {trial}: {got} vs {expect}");
        }
    }

    #[test]
    fn record_carry_forward() {
        let ev = |t: f64, h: f64| MetricEvent {
            t_s: t,
            entropy_bits: h,
            classification_rate: 0.0,
            f1: 0.0,
        };
        let r = TrialRecord {
            seed: 1,
            config_digest: String::new(),
            events: vec![ev(0.0, 10.0), ev(4.5, 8.0), ev(9.0, 5.0)],
        };
        assert_eq!(r.at(-1.0), None);
        assert_eq!(r.at(0.0).unwrap().entropy_bits, 10.0);
        assert_eq!(r.at(4.49).unwrap().entropy_bits, 10.0);
        assert_eq!(r.at(4.5).unwrap().entropy_bits, 8.0);
        assert_eq!(r.at(300.0).unwrap().entropy_bits, 5.0);
        assert_eq!(r.measurement_count(), 2);
    }
}
