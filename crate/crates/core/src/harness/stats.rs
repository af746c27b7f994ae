//! Cross-trial aggregation of metric time series.

use serde::Serialize;

use super::metrics::{Metric, TrialRecord};
use crate::error::{Error, Result};

/// Normal quantile for two-sided 95% bounds.
pub const Z95: f64 = 1.96;

/// Quantile levels reported in the entropy CDF table.
pub const CDF_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// `0, bin_s, 2 bin_s, ...` up to and including `budget_s`.
pub fn time_grid(budget_s: f64, bin_s: f64) -> Vec<f64> {
    assert!(
        bin_s > 0.0 && budget_s >= 0.0,
        "time grid needs a positive bin and budget"
    );
    let n = (budget_s / bin_s + 1e-9).floor() as usize;
    let mut bins: Vec<f64> = (0..=n).map(|k| k as f64 * bin_s).collect();
    if budget_s - bins[n] > 1e-9 * budget_s.max(1.0) {
        bins.push(budget_s);
    }
    bins
}

/// Sample mean and half-width of the normal-approximation 95% interval.
/// A single value has zero half-width.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt())
}

/// Type-7 (linear interpolation) quantile of ascending `sorted`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fraction of `sorted` at or below `x`.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

fn values_at(records: &[TrialRecord], metric: Metric, t: f64) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            r.at(t).map(|e| metric.of(e)).ok_or_else(|| {
                Error::InvalidState(format!("trial {} has no event at or before {t} s", r.seed))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateSeries {
    pub metric: Metric,
    pub time_bins: Vec<f64>,
    pub mean: Vec<f64>,
    pub ci95_low: Vec<f64>,
    pub ci95_high: Vec<f64>,
    pub n_trials: usize,
}

impl AggregateSeries {
    pub fn from_records(records: &[TrialRecord], metric: Metric, time_bins: &[f64]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Config("aggregation needs at least one trial".into()));
        }
        let mut s = Self {
            metric,
            time_bins: time_bins.to_vec(),
            mean: Vec::with_capacity(time_bins.len()),
            ci95_low: Vec::with_capacity(time_bins.len()),
            ci95_high: Vec::with_capacity(time_bins.len()),
            n_trials: records.len(),
        };
        for &t in time_bins {
            let (m, h) = mean_ci95(&values_at(records, metric, t)?);
            s.mean.push(m);
            s.ci95_low.push(m - h);
            s.ci95_high.push(m + h);
        }
        Ok(s)
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(f64::NAN)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,mean,ci95_low,ci95_high,n_trials\n");
        for i in 0..self.time_bins.len() {
            out.push_str(&format!(
                "{:.3},{:.6},{:.6},{:.6},{}\n",
                self.time_bins[i], self.mean[i], self.ci95_low[i], self.ci95_high[i], self.n_trials
            ));
        }
        out
    }
}

/// Per-bin empirical distribution of trial entropies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyCdf {
    pub time_bins: Vec<f64>,
    /// Ascending entropies of every trial, one vector per bin.
    pub samples: Vec<Vec<f64>>,
}

impl EntropyCdf {
    pub fn from_records(records: &[TrialRecord], time_bins: &[f64]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Config("entropy CDF needs at least one trial".into()));
        }
        let samples = time_bins
            .iter()
            .map(|&t| {
                let mut v = values_at(records, Metric::Entropy, t)?;
                v.sort_by(f64::total_cmp);
                Ok(v)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            time_bins: time_bins.to_vec(),
            samples,
        })
    }

    pub fn quantile(&self, bin: usize, q: f64) -> f64 {
        quantile(&self.samples[bin], q)
    }

    pub fn cdf(&self, bin: usize, entropy_bits: f64) -> f64 {
        ecdf(&self.samples[bin], entropy_bits)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,q02_5,q25,q50,q75,q97_5\n");
        for (i, t) in self.time_bins.iter().enumerate() {
            out.push_str(&format!("{t:.3}"));
            for q in CDF_LEVELS {
                out.push_str(&format!(",{:.6}", self.quantile(i, q)));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-seed differences `a - b` of one metric at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedComparison {
    pub metric: Metric,
    pub t_s: f64,
    pub seeds: Vec<u64>,
    pub deltas: Vec<f64>,
    pub mean_delta: f64,
    pub ci95_half_width: f64,
}

impl PairedComparison {
    /// Records are matched by seed; both sides must hold the same seeds.
    pub fn new(a: &[TrialRecord], b: &[TrialRecord], metric: Metric, t_s: f64) -> Result<Self> {
        let mut seeds = Vec::with_capacity(a.len());
        let mut deltas = Vec::with_capacity(a.len());
        for ra in a {
            let rb = b
                .iter()
                .find(|r| r.seed == ra.seed)
                .ok_or_else(|| Error::Config(format!("seed {} has no paired trial", ra.seed)))?;
            let va = values_at(std::slice::from_ref(ra), metric, t_s)?[0];
            let vb = values_at(std::slice::from_ref(rb), metric, t_s)?[0];
            seeds.push(ra.seed);
            deltas.push(va - vb);
        }
        if seeds.is_empty() || a.len() != b.len() {
            return Err(Error::Config(
                "paired comparison needs equal, non-empty trial sets".into(),
            ));
        }
        let (mean_delta, ci95_half_width) = mean_ci95(&deltas);
        Ok(Self {
            metric,
            t_s,
            seeds,
            deltas,
            mean_delta,
            ci95_half_width,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,delta\n");
        for (s, d) in self.seeds.iter().zip(&self.deltas) {
            out.push_str(&format!("{s},{d:.6}\n"));
        }
        out
    }
}

/// First time each trial's metric reaches `level`; trials that never do
/// count as `censor_s`.
pub fn time_to_level(records: &[TrialRecord], metric: Metric, level: f64, censor_s: f64) -> Vec<f64> {
    records
        .iter()
        .map(|r| r.first_time_reaching(metric, level).unwrap_or(censor_s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::MetricEvent;
    use proptest::prelude::*;

    fn rec(seed: u64, points: &[(f64, f64)]) -> TrialRecord {
        TrialRecord {
            seed,
            config_digest: String::new(),
            events: points
                .iter()
                .map(|&(t_s, entropy_bits)| MetricEvent {
                    t_s,
                    entropy_bits,
                    classification_rate: 0.0,
                    f1: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn grid_includes_budget() {
        assert_eq!(time_grid(3.0, 1.0), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(time_grid(2.5, 1.0), vec![0.0, 1.0, 2.0, 2.5]);
        assert_eq!(time_grid(300.0, 1.0).len(), 301);
    }

    #[test]
    fn quantile_and_ecdf_examples() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(ecdf(&v, 2.9), 0.5);
        assert_eq!(ecdf(&v, 4.0), 1.0);
        assert_eq!(ecdf(&v, 0.5), 0.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&[7.0], 0.975), 7.0);
    }

    #[test]
    fn carry_forward_never_interpolates() {
        let r = rec(1, &[(0.0, 100.0), (2.5, 50.0)]);
        let s = AggregateSeries::from_records(&[r], Metric::Entropy, &time_grid(4.0, 1.0)).unwrap();
        assert_eq!(s.mean, vec![100.0, 100.0, 100.0, 50.0, 50.0]);
        assert_eq!(s.ci95_low, s.mean);
    }

    #[test]
    fn cdf_of_four_trials() {
        let rs: Vec<_> = (1..=4).map(|k| rec(k, &[(0.0, k as f64)])).collect();
        let c = EntropyCdf::from_records(&rs, &[0.0]).unwrap();
        assert_eq!(c.quantile(0, 0.5), 2.5);
        assert_eq!(c.cdf(0, 2.9), 0.5);
        let csv = c.to_csv();
        assert!(
            csv.starts_with("t_s,q02_5,q25,q50,q75,q97_5\n0.000,1.075"),
            "{csv}"
        );
    }

    #[test]
    fn identical_trials_have_no_spread() {
        let rs: Vec<_> = (0..5).map(|k| rec(k, &[(0.0, 9.0), (1.0, 4.0)])).collect();
        let bins = time_grid(2.0, 1.0);
        let c = EntropyCdf::from_records(&rs, &bins).unwrap();
        for i in 0..bins.len() {
            assert_eq!(c.quantile(i, 0.025), c.quantile(i, 0.975));
        }
        let s = AggregateSeries::from_records(&rs, Metric::Entropy, &bins).unwrap();
        assert_eq!(s.mean, vec![9.0, 4.0, 4.0]);
        assert_eq!(s.ci95_high, s.ci95_low);
    }

    #[test]
    fn paired_deltas_match_by_seed() {
        let a = vec![rec(1, &[(0.0, 10.0)]), rec(2, &[(0.0, 20.0)])];
        let b = vec![rec(2, &[(0.0, 5.0)]), rec(1, &[(0.0, 4.0)])];
        let p = PairedComparison::new(&a, &b, Metric::Entropy, 0.0).unwrap();
        assert_eq!(p.deltas, vec![6.0, 15.0]);
        assert_eq!(p.mean_delta, 10.5);
        assert!(PairedComparison::new(&a, &b[..1], Metric::Entropy, 0.0).is_err());
    }

    #[test]
    fn time_to_level_censors() {
        let mut r = rec(1, &[(0.0, 0.0), (3.0, 0.0)]);
        r.events[1].classification_rate = 0.6;
        let never = rec(2, &[(0.0, 0.0)]);
        let t = time_to_level(&[r, never], Metric::ClassificationRate, 0.5, 300.0);
        assert_eq!(t, vec![3.0, 300.0]);
    }

    proptest! {
        #[test]
        fn bounds_bracket_mean(values in prop::collection::vec(0.0f64..1e4, 1..30)) {
            let rs: Vec<_> = values
                .iter()
                .enumerate()
                .map(|(k, v)| rec(k as u64, &[(0.0, *v)]))
                .collect();
            let s = AggregateSeries::from_records(&rs, Metric::Entropy, &[0.0, 1.0]).unwrap();
            for i in 0..2 {
                prop_assert!(s.ci95_low[i] <= s.mean[i] && s.mean[i] <= s.ci95_high[i]);
            }
            let c = EntropyCdf::from_records(&rs, &[0.0]).unwrap();
            let qs: Vec<f64> = CDF_LEVELS.iter().map(|q| c.quantile(0, *q)).collect();
            prop_assert!(qs.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
