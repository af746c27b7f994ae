//! Writing experiment artifacts to disk.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ipp_core::harness::plot::line_plot;
use ipp_core::harness::{Experiment, Metric, PairedComparison};
use ipp_core::ScenarioConfig;

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn y_label(metric: Metric) -> &'static str {
    match metric {
        Metric::Entropy => "map entropy [bits]",
        Metric::ClassificationRate => "classification rate",
        Metric::F1 => "F1 score",
    }
}

/// Per-trial CSVs, aggregates, entropy CDF, plots and the effective config.
pub fn write_experiment(dir: &Path, cfg: &ScenarioConfig, exp: &Experiment) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |rel: String, body: String| -> std::io::Result<()> {
        let p = dir.join(rel);
        write_atomic(&p, &body)?;
        written.push(p);
        Ok(())
    };
    put("effective_config.toml".into(), cfg.to_toml())?;
    for r in &exp.records {
        put(format!("trial_{}.csv", r.seed), r.to_csv())?;
    }
    for s in &exp.series {
        put(format!("aggregate_{}.csv", s.metric.name()), s.to_csv())?;
        let title = format!("{} ({} trials)", exp.planner.name(), s.n_trials);
        put(
            format!("plots/{}.svg", s.metric.name()),
            line_plot(&title, y_label(s.metric), &[(exp.planner.name(), s)]),
        )?;
    }
    put("cdf_entropy.csv".into(), exp.entropy_cdf.to_csv())?;
    Ok(written)
}

pub struct SummaryRow {
    pub planner: &'static str,
    pub n_trials: usize,
    pub entropy: (f64, f64),
    pub classification_rate: (f64, f64),
    pub f1: (f64, f64),
}

impl SummaryRow {
    pub fn new(exp: &Experiment) -> Self {
        let last = |m: Metric| {
            let s = exp.series(m);
            let i = s.mean.len() - 1;
            (s.mean[i], s.ci95_high[i] - s.mean[i])
        };
        Self {
            planner: exp.planner.name(),
            n_trials: exp.records.len(),
            entropy: last(Metric::Entropy),
            classification_rate: last(Metric::ClassificationRate),
            f1: last(Metric::F1),
        }
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "planner,n_trials,final_entropy_mean,final_entropy_ci95,final_classification_rate_mean,final_classification_rate_ci95,final_f1_mean,final_f1_ci95\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.planner,
            r.n_trials,
            r.entropy.0,
            r.entropy.1,
            r.classification_rate.0,
            r.classification_rate.1,
            r.f1.0,
            r.f1.1
        ));
    }
    out
}

pub fn summary_table(rows: &[SummaryRow], paired: &PairedComparison) -> String {
    let mut out = format!(
        "{:<10} {:>6} {:>22} {:>20} {:>18}\n",
        "planner", "trials", "final entropy [bits]", "classification rate", "F1"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<10} {:>6} {:>13.1} ± {:>6.1} {:>11.3} ± {:>6.3} {:>9.3} ± {:>6.3}\n",
            r.planner,
            r.n_trials,
            r.entropy.0,
            r.entropy.1,
            r.classification_rate.0,
            r.classification_rate.1,
            r.f1.0,
            r.f1.1
        ));
    }
    out.push_str(&format!(
        "paired final entropy, adaptive - lawnmower: {:.1} ± {:.1} bits over {} seeds\n",
        paired.mean_delta,
        paired.ci95_half_width,
        paired.deltas.len()
    ));
    out
}

pub fn comparison_plots(a: &Experiment, b: &Experiment) -> Vec<(String, String)> {
    Metric::ALL
        .iter()
        .map(|m| {
            let (sa, sb) = (a.series(*m), b.series(*m));
            let title = format!(
                "{} vs {} ({} paired trials)",
                a.planner.name(),
                b.planner.name(),
                sa.n_trials
            );
            (
                format!("plots/{}.svg", m.name()),
                line_plot(
                    &title,
                    y_label(*m),
                    &[(a.planner.name(), sa), (b.planner.name(), sb)],
                ),
            )
        })
        .collect()
}
