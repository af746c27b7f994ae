//! Scenario configuration: one TOML file describing the world, vehicle,
//! planners and experiment. Every field has a default.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::CoverageConfig;
use crate::error::{Error, Result};
use crate::grid::{ClassificationThresholds, GridGeometry};
use crate::optimizer::{CmaesConfig, PenaltyWeights};
use crate::planner::{build_lattice, Lattice, ObjectiveMode, OptimizerMode, PlannerConfig};
use crate::sensor::SensorModel;
use crate::trajectory::{DynamicLimits, FlightEnvelope};
use crate::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Adaptive,
    Lawnmower,
}

impl PlannerKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerKind::Adaptive => "adaptive",
            PlannerKind::Lawnmower => "lawnmower",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution_m: f64,
    pub weed_count: usize,
}

impl Default for MapSection {
    fn default() -> Self {
        Self {
            width_m: 50.0,
            height_m: 50.0,
            resolution_m: 1.0,
            weed_count: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub half_angle_deg: f64,
    pub accuracy_floor: f64,
    pub accuracy_ceiling: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            half_angle_deg: 45.0,
            accuracy_floor: 0.5,
            accuracy_ceiling: 0.95,
            h_min: 2.0,
            h_max: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub delta_nw: f64,
    pub delta_w: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            delta_nw: 0.25,
            delta_w: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightSection {
    pub alt_min: f64,
    pub alt_max: f64,
    pub v_max: f64,
    pub a_max: f64,
    /// Take-off point shared by both planners; map center at `alt_max`
    /// when omitted.
    pub start: Option<[f64; 3]>,
}

impl Default for FlightSection {
    fn default() -> Self {
        Self {
            alt_min: 2.0,
            alt_max: 45.0,
            v_max: 5.0,
            a_max: 3.0,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub budget_s: f64,
    pub horizon: usize,
    pub objective_mode: ObjectiveMode,
    pub optimizer_mode: OptimizerMode,
    pub lattice_levels: usize,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            budget_s: 300.0,
            horizon: 7,
            objective_mode: ObjectiveMode::TimeVarying,
            optimizer_mode: OptimizerMode::Local,
            lattice_levels: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub planner: PlannerKind,
    pub n_trials: usize,
    pub base_seed: u64,
    pub jobs: usize,
    pub out_dir: String,
    /// Width of the aggregation time bins.
    pub bin_s: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            planner: PlannerKind::Adaptive,
            n_trials: 20,
            base_seed: 1,
            jobs: 1,
            out_dir: "out".into(),
            bin_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub map: MapSection,
    pub sensor: SensorSection,
    pub thresholds: ThresholdSection,
    pub flight: FlightSection,
    pub planner: PlannerSection,
    pub cmaes: CmaesConfig,
    pub penalties: PenaltyWeights,
    pub baseline: CoverageConfig,
    pub experiment: ExperimentSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            map: MapSection::default(),
            sensor: SensorSection::default(),
            thresholds: ThresholdSection::default(),
            flight: FlightSection::default(),
            planner: PlannerSection::default(),
            cmaes: CmaesConfig::default(),
            penalties: PenaltyWeights::default(),
            baseline: CoverageConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

/// An unrecognized key in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownKey {
    pub key: String,
    pub suggestion: Option<String>,
}

impl std::fmt::Display for UnknownKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown key `{}`", self.key)?;
        if let Some(s) = &self.suggestion {
            write!(f, " (did you mean `{s}`?)")?;
        }
        Ok(())
    }
}

fn key_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(key_err(key, format!("must be a positive number, got {v}")))
    }
}

impl ScenarioConfig {
    /// Parses TOML text. Keys not in the schema are dropped and reported.
    pub fn from_toml_str(text: &str) -> Result<(Self, Vec<UnknownKey>)> {
        let value: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        let unknown = unknown_keys(&value);
        let mut pruned = value;
        for u in &unknown {
            remove_path(&mut pruned, &u.key);
        }
        let cfg: ScenarioConfig = pruned
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid value: {e}")))?;
        cfg.validate()?;
        Ok((cfg, unknown))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<UnknownKey>)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes to TOML")
    }

    pub fn with_planner(&self, planner: PlannerKind) -> Self {
        let mut cfg = self.clone();
        cfg.experiment.planner = planner;
        cfg
    }

    /// Hex SHA-256 of everything that affects trial outcomes.
    pub fn digest(&self) -> String {
        let mut scenario = self.clone();
        scenario.experiment = ExperimentSection {
            planner: self.experiment.planner,
            ..ExperimentSection::default()
        };
        scenario.name = String::new();
        let mut h = Sha256::new();
        h.update(scenario.to_toml().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.map;
        positive("map.width_m", m.width_m)?;
        positive("map.height_m", m.height_m)?;
        positive("map.resolution_m", m.resolution_m)?;
        let geometry = self.geometry()?;
        if m.weed_count > geometry.cell_count() {
            return Err(key_err(
                "map.weed_count",
                format!(
                    "{} exceeds the {} cells of the map",
                    m.weed_count,
                    geometry.cell_count()
                ),
            ));
        }

        let s = &self.sensor;
        if !(s.half_angle_deg > 0.0 && s.half_angle_deg < 90.0) {
            return Err(key_err("sensor.half_angle_deg", "must lie in (0, 90)"));
        }
        if !(0.5..1.0).contains(&s.accuracy_floor) {
            return Err(key_err("sensor.accuracy_floor", "must lie in [0.5, 1)"));
        }
        if !(s.accuracy_ceiling > s.accuracy_floor && s.accuracy_ceiling < 1.0) {
            return Err(key_err(
                "sensor.accuracy_ceiling",
                "must exceed sensor.accuracy_floor and stay below 1",
            ));
        }
        positive("sensor.h_min", s.h_min)?;
        if !(s.h_max > s.h_min && s.h_max.is_finite()) {
            return Err(key_err("sensor.h_max", "must exceed sensor.h_min"));
        }

        let t = &self.thresholds;
        if !(t.delta_nw > 0.0 && t.delta_nw < 1.0) {
            return Err(key_err("thresholds.delta_nw", "must lie in (0, 1)"));
        }
        if !(t.delta_w > 0.0 && t.delta_w < 1.0) {
            return Err(key_err("thresholds.delta_w", "must lie in (0, 1)"));
        }
        if t.delta_nw >= t.delta_w {
            return Err(key_err(
                "thresholds.delta_w",
                format!(
                    "must be greater than thresholds.delta_nw (need delta_nw < delta_w, got {} >= {})",
                    t.delta_nw, t.delta_w
                ),
            ));
        }

        let f = &self.flight;
        positive("flight.alt_min", f.alt_min)?;
        if !(f.alt_max > f.alt_min && f.alt_max.is_finite()) {
            return Err(key_err("flight.alt_max", "must exceed flight.alt_min"));
        }
        positive("flight.v_max", f.v_max)?;
        positive("flight.a_max", f.a_max)?;
        let envelope = self.envelope()?;
        if !envelope.contains(&self.start()) {
            return Err(key_err(
                "flight.start",
                "must lie inside the map and altitude range",
            ));
        }

        let p = &self.planner;
        positive("planner.budget_s", p.budget_s)?;
        if p.horizon == 0 {
            return Err(key_err("planner.horizon", "must be at least 1"));
        }
        if p.lattice_levels == 0 {
            return Err(key_err("planner.lattice_levels", "must be at least 1"));
        }
        self.cmaes.validate().map_err(|e| key_err("cmaes", e))?;
        if !(self.penalties.budget >= 0.0) {
            return Err(key_err("penalties.budget", "must be non-negative"));
        }
        if !(self.penalties.envelope >= 0.0) {
            return Err(key_err("penalties.envelope", "must be non-negative"));
        }

        let b = &self.baseline;
        if !(b.altitude_m >= f.alt_min && b.altitude_m <= f.alt_max) {
            return Err(key_err(
                "baseline.altitude_m",
                "must lie within the flight altitude range",
            ));
        }
        if !(0.0..1.0).contains(&b.overlap_frac) {
            return Err(key_err("baseline.overlap_frac", "must lie in [0, 1)"));
        }

        let e = &self.experiment;
        if e.n_trials == 0 {
            return Err(key_err("experiment.n_trials", "must be at least 1"));
        }
        if e.jobs == 0 {
            return Err(key_err("experiment.jobs", "must be at least 1"));
        }
        positive("experiment.bin_s", e.bin_s)?;
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(key_err("name", "must be a plain directory name"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        let m = &self.map;
        GridGeometry::new(m.width_m, m.height_m, m.resolution_m, [0.0, 0.0]).map_err(|e| key_err("map", e))
    }

    pub fn sensor_model(&self) -> Result<SensorModel> {
        let s = &self.sensor;
        SensorModel::new(
            s.half_angle_deg.to_radians(),
            s.accuracy_floor,
            s.accuracy_ceiling,
            s.h_min,
            s.h_max,
        )
        .map_err(|e| key_err("sensor", e))
    }

    pub fn classification_thresholds(&self) -> Result<ClassificationThresholds> {
        ClassificationThresholds::new(self.thresholds.delta_nw, self.thresholds.delta_w)
            .map_err(|e| key_err("thresholds", e))
    }

    pub fn envelope(&self) -> Result<FlightEnvelope> {
        FlightEnvelope::new(&self.geometry()?, self.flight.alt_min, self.flight.alt_max)
            .map_err(|e| key_err("flight", e))
    }

    pub fn limits(&self) -> Result<DynamicLimits> {
        DynamicLimits::new(self.flight.v_max, self.flight.a_max).map_err(|e| key_err("flight", e))
    }

    pub fn start(&self) -> Position {
        match self.flight.start {
            Some([x, y, z]) => Position::new(x, y, z),
            None => {
                let m = &self.map;
                Position::new(m.width_m / 2.0, m.height_m / 2.0, self.flight.alt_max)
            }
        }
    }

    pub fn lattice(&self) -> Result<Lattice> {
        build_lattice(
            &self.geometry()?,
            &self.sensor_model()?,
            &self.envelope()?,
            self.planner.lattice_levels,
        )
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            horizon: self.planner.horizon,
            budget_s: self.planner.budget_s,
            objective_mode: self.planner.objective_mode,
            optimizer_mode: self.planner.optimizer_mode,
            cmaes: self.cmaes,
            penalties: self.penalties,
        }
    }
}

// Every key path the schema accepts, with optional fields filled in.
fn schema() -> toml::Table {
    let mut full = ScenarioConfig::default();
    full.cmaes.population = Some(4);
    full.flight.start = Some([0.0; 3]);
    toml::Table::try_from(&full).expect("scenario config serializes to a table")
}

fn unknown_keys(input: &toml::Table) -> Vec<UnknownKey> {
    let mut out = Vec::new();
    walk_unknown(input, &schema(), "", &mut out);
    out
}

fn walk_unknown(input: &toml::Table, schema: &toml::Table, prefix: &str, out: &mut Vec<UnknownKey>) {
    let sorted: BTreeMap<&String, &toml::Value> = input.iter().collect();
    for (k, v) in sorted {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match schema.get(k) {
            Some(toml::Value::Table(sub)) => {
                if let toml::Value::Table(t) = v {
                    walk_unknown(t, sub, &path, out);
                }
            }
            Some(_) => {}
            None => {
                let suggestion = schema
                    .keys()
                    .map(|cand| (strsim::jaro_winkler(k, cand), cand))
                    .filter(|(score, _)| *score >= 0.7)
                    .max_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, cand)| {
                        if prefix.is_empty() {
                            cand.clone()
                        } else {
                            format!("{prefix}.{cand}")
                        }
                    });
                out.push(UnknownKey {
                    key: path,
                    suggestion,
                });
            }
        }
    }
}

fn remove_path(table: &mut toml::Table, path: &str) {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().unwrap_or_default();
    let mut cur = table;
    for p in parts {
        match cur.get_mut(p) {
            Some(toml::Value::Table(t)) => cur = t,
            _ => return,
        }
    }
    cur.remove(last);
}
