//! `ipp`: run, compare and inspect adaptive path planning experiments.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ipp_core::harness::{run_experiment, run_trial, Metric, PairedComparison};
use ipp_core::planner::{MissionObserver, PlannerEvent};
use ipp_core::trajectory::PolynomialSegment;
use ipp_core::{PlannerKind, ScenarioConfig};

use output::{comparison_plots, summary_csv, summary_table, write_atomic, write_experiment, SummaryRow};

// Trajectory dump sample spacing.
const SAMPLE_DT_S: f64 = 0.1;

#[derive(Parser)]
#[command(
    name = "ipp",
    version,
    about = "Adaptive informative path planning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials of one planner and write CSVs and plots.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        planner: Option<PlannerArg>,
    },
    /// Run both planners on the same seeds and summarize.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Fly one adaptive trial and dump its trajectory and event stream.
    InspectPath {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long, env = "IPP_OUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Load and validate a config file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output root, overriding experiment.out_dir.
    #[arg(long, env = "IPP_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Adaptive,
    Lawnmower,
}

impl From<PlannerArg> for PlannerKind {
    fn from(p: PlannerArg) -> Self {
        match p {
            PlannerArg::Adaptive => PlannerKind::Adaptive,
            PlannerArg::Lawnmower => PlannerKind::Lawnmower,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ipp_core::Error> for Failure {
    fn from(e: ipp_core::Error) -> Self {
        match e {
            ipp_core::Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("write failed: {e}"))
    }
}

fn load(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::default());
    };
    let (cfg, unknown) = ScenarioConfig::load(path)?;
    for u in unknown {
        log::warn!("{}: {u}", path.display());
    }
    Ok(cfg)
}

fn apply(cfg: &mut ScenarioConfig, common: &Common) -> Result<(), Failure> {
    if let Some(n) = common.trials {
        cfg.experiment.n_trials = n;
    }
    if let Some(s) = common.seed {
        cfg.experiment.base_seed = s;
    }
    if let Some(j) = common.jobs {
        cfg.experiment.jobs = j;
    }
    if let Some(o) = &common.out {
        cfg.experiment.out_dir = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(())
}

fn scenario_dir(cfg: &ScenarioConfig) -> PathBuf {
    Path::new(&cfg.experiment.out_dir).join(&cfg.name)
}

fn cmd_run(common: &Common, planner: Option<PlannerArg>) -> Result<(), Failure> {
    let mut cfg = load(common.config.as_deref())?;
    if let Some(p) = planner {
        cfg.experiment.planner = p.into();
    }
    apply(&mut cfg, common)?;
    let exp = run_experiment(&cfg, cfg.experiment.planner)?;
    let dir = scenario_dir(&cfg).join(exp.planner.name());
    write_experiment(&dir, &cfg, &exp)?;
    let s = exp.series(Metric::Entropy);
    println!(
        "{}: {} trials, final entropy {:.1} ± {:.1} bits -> {}",
        exp.planner.name(),
        exp.records.len(),
        s.final_mean(),
        s.ci95_high.last().unwrap_or(&f64::NAN) - s.final_mean(),
        dir.display()
    );
    Ok(())
}

fn cmd_compare(common: &Common) -> Result<(), Failure> {
    let mut cfg = load(common.config.as_deref())?;
    apply(&mut cfg, common)?;
    let root = scenario_dir(&cfg);
    let mut exps = Vec::new();
    for planner in [PlannerKind::Adaptive, PlannerKind::Lawnmower] {
        let pc = cfg.with_planner(planner);
        let exp = run_experiment(&pc, planner)?;
        write_experiment(&root.join(planner.name()), &pc, &exp)?;
        exps.push(exp);
    }
    let paired = PairedComparison::new(
        &exps[0].records,
        &exps[1].records,
        Metric::Entropy,
        cfg.planner.budget_s,
    )?;
    let rows: Vec<SummaryRow> = exps.iter().map(SummaryRow::new).collect();
    let dir = root.join("compare");
    write_atomic(&dir.join("effective_config.toml"), &cfg.to_toml())?;
    write_atomic(&dir.join("summary.csv"), &summary_csv(&rows))?;
    write_atomic(&dir.join("paired_entropy.csv"), &paired.to_csv())?;
    for (rel, svg) in comparison_plots(&exps[0], &exps[1]) {
        write_atomic(&dir.join(rel), &svg)?;
    }
    print!("{}", summary_table(&rows, &paired));
    println!("-> {}", dir.display());
    Ok(())
}

#[derive(Default)]
struct Inspector {
    events: Vec<PlannerEvent>,
    samples: Vec<[f64; 10]>,
}

impl MissionObserver for Inspector {
    fn event(&mut self, e: &PlannerEvent) {
        self.events.push(e.clone());
    }

    fn leg(&mut self, t_start: f64, seg: &PolynomialSegment) {
        let n = (seg.duration_s / SAMPLE_DT_S).ceil().max(1.0) as usize;
        // skip t = 0, it repeats the previous leg's end
        let first = usize::from(!self.samples.is_empty());
        for k in first..=n {
            let t = (k as f64 * SAMPLE_DT_S).min(seg.duration_s);
            let (p, v, a) = (seg.derivative(t, 0), seg.derivative(t, 1), seg.derivative(t, 2));
            self.samples
                .push([t_start + t, p.x, p.y, p.z, v.x, v.y, v.z, a.x, a.y, a.z]);
        }
    }
}

fn cmd_inspect(config: Option<&Path>, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let mut cfg = load(config)?;
    if let Some(o) = out {
        cfg.experiment.out_dir = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    let mut inspector = Inspector::default();
    let record = run_trial(&cfg, PlannerKind::Adaptive, seed, &mut inspector)?;
    let dir = scenario_dir(&cfg).join(format!("inspect_seed_{seed}"));

    let mut traj = String::from("t_s,x,y,z,vx,vy,vz,ax,ay,az\n");
    for s in &inspector.samples {
        let cols: Vec<String> = s.iter().map(|v| format!("{v:.6}")).collect();
        traj.push_str(&cols.join(","));
        traj.push('\n');
    }
    let mut events = String::new();
    for e in &inspector.events {
        let line = serde_json::to_string(e).map_err(|e| Failure::Runtime(e.to_string()))?;
        events.push_str(&line);
        events.push('\n');
    }
    write_atomic(&dir.join("effective_config.toml"), &cfg.to_toml())?;
    write_atomic(&dir.join("trajectory.csv"), &traj)?;
    write_atomic(&dir.join("events.jsonl"), &events)?;
    write_atomic(&dir.join(format!("trial_{seed}.csv")), &record.to_csv())?;
    let last = record.final_event().copied();
    println!(
        "seed {seed}: {} measurements, {} trajectory samples, final entropy {:.1} bits -> {}",
        record.measurement_count(),
        inspector.samples.len(),
        last.map_or(f64::NAN, |e| e.entropy_bits),
        dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, planner } => cmd_run(common, *planner),
        Command::Compare { common } => cmd_compare(common),
        Command::InspectPath { config, seed, out } => cmd_inspect(config.as_deref(), *seed, out.as_deref()),
        Command::Validate { config } => load(Some(config)).map(|_| println!("{}: ok", config.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
