//! Probabilistic 2D weed map.
//!
//! Each cell holds an independent Bernoulli belief over weed occupancy, stored
//! as natural-log odds so that independent observations fuse by addition.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entropy in bits of a cell stored as log-odds `l`.
#[inline]
pub fn logodds_entropy(l: f64) -> f64 {
    let a = l.abs();
    if a.is_infinite() {
        return 0.0;
    }
    let e = (-a).exp();
    (e.ln_1p() + a * e / (1.0 + e)) * std::f64::consts::LOG2_E
}

/// Default symmetric log-odds bound, `logit(0.999)`.
pub const DEFAULT_LOGODDS_CLAMP: f64 = 6.906_754_778_648_553;

const TILING_TOLERANCE: f64 = 1e-9;

/// Natural-log odds of a probability.
#[inline]
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Inverse of [`logit`].
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Shannon entropy in bits of a Bernoulli variable, with `0 log 0 = 0`.
pub fn cell_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Extent and cell size of a rectangular map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution_m: f64,
    /// World coordinate of the outer corner of cell (0, 0).
    pub origin: [f64; 2],
    cols: usize,
    rows: usize,
}

impl GridGeometry {
    pub fn new(width_m: f64, height_m: f64, resolution_m: f64, origin: [f64; 2]) -> Result<Self> {
        if !(resolution_m > 0.0) || !resolution_m.is_finite() {
            return Err(Error::Config(format!(
                "grid resolution must be positive, got {resolution_m}"
            )));
        }
        let tile = |extent: f64, name: &str| -> Result<usize> {
            let n = extent / resolution_m;
            let rounded = n.round();
            if !(rounded >= 1.0) || (n - rounded).abs() > TILING_TOLERANCE * rounded.max(1.0) {
                return Err(Error::Config(format!(
                    "map {name} {extent} m is not a positive whole number of {resolution_m} m cells"
                )));
            }
            Ok(rounded as usize)
        };
        let cols = tile(width_m, "width")?;
        let rows = tile(height_m, "height")?;
        Ok(Self {
            width_m,
            height_m,
            resolution_m,
            origin,
            cols,
            rows,
        })
    }

    /// Square map with 1 m cells anchored at the world origin.
    pub fn square(side_m: f64) -> Result<Self> {
        Self::new(side_m, side_m, 1.0, [0.0, 0.0])
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cell_count(&self) -> usize {
        self.cols * self.rows
    }

    /// Row-major index of the cell at (`col`, `row`).
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.cols, index / self.cols)
    }

    pub fn cell_center(&self, index: usize) -> [f64; 2] {
        let (col, row) = self.col_row(index);
        [
            self.origin[0] + (col as f64 + 0.5) * self.resolution_m,
            self.origin[1] + (row as f64 + 0.5) * self.resolution_m,
        ]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            self.origin[0] + 0.5 * self.width_m,
            self.origin[1] + 0.5 * self.height_m,
        ]
    }

    /// Half-open range of column indices whose centers lie in `[lo, hi)`.
    pub(crate) fn col_span(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        span(
            lo - self.origin[0],
            hi - self.origin[0],
            self.resolution_m,
            self.cols,
        )
    }

    pub(crate) fn row_span(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        span(
            lo - self.origin[1],
            hi - self.origin[1],
            self.resolution_m,
            self.rows,
        )
    }
}

// Cell k has its center at (k + 0.5) * res; keep k with lo <= center < hi.
fn span(lo: f64, hi: f64, res: f64, n: usize) -> std::ops::Range<usize> {
    let first = (lo / res - 0.5).ceil().max(0.0);
    let end = (hi / res - 0.5).ceil().max(0.0);
    let first = (first as usize).min(n);
    let end = (end as usize).min(n);
    first..end.max(first)
}

/// Weed / non-weed probability thresholds delimiting the unclassified set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationThresholds {
    pub delta_nw: f64,
    pub delta_w: f64,
}

impl ClassificationThresholds {
    pub fn new(delta_nw: f64, delta_w: f64) -> Result<Self> {
        if !(delta_nw > 0.0 && delta_nw <= 0.5) {
            return Err(Error::Config(format!(
                "delta_nw must lie in (0, 0.5], got {delta_nw}"
            )));
        }
        if !(0.5..1.0).contains(&delta_w) {
            return Err(Error::Config(format!(
                "delta_w must lie in [0.5, 1), got {delta_w}"
            )));
        }
        if delta_nw >= delta_w {
            return Err(Error::Config(format!(
                "delta_nw ({delta_nw}) must be strictly below delta_w ({delta_w})"
            )));
        }
        Ok(Self { delta_nw, delta_w })
    }

    /// True when `p` is strictly between the two thresholds.
    #[inline]
    pub fn is_unclassified(&self, p: f64) -> bool {
        self.delta_nw < p && p < self.delta_w
    }

    /// Thresholds mapped to log-odds, for comparing stored beliefs exactly.
    pub fn logodds_bounds(&self) -> (f64, f64) {
        (logit(self.delta_nw), logit(self.delta_w))
    }
}

impl Default for ClassificationThresholds {
    fn default() -> Self {
        Self {
            delta_nw: 0.25,
            delta_w: 0.75,
        }
    }
}

/// Belief map: per-cell log-odds of weed occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    logodds: Vec<f64>,
    clamp: f64,
}

impl OccupancyGrid {
    /// Uniform 0.5 prior with the default clamp.
    pub fn new(geometry: GridGeometry) -> Self {
        Self::with_clamp(geometry, DEFAULT_LOGODDS_CLAMP)
    }

    /// Uniform 0.5 prior with a custom symmetric log-odds bound (may be infinite).
    pub fn with_clamp(geometry: GridGeometry, clamp: f64) -> Self {
        assert!(clamp > 0.0, "log-odds clamp must be positive");
        Self {
            geometry,
            logodds: vec![0.0; geometry.cell_count()],
            clamp,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn len(&self) -> usize {
        self.logodds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logodds.is_empty()
    }

    pub fn logodds(&self, cell: usize) -> f64 {
        self.logodds[cell]
    }

    pub fn probability(&self, cell: usize) -> f64 {
        sigmoid(self.logodds[cell])
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.logodds.iter().map(|&l| sigmoid(l))
    }

    /// Overwrites one cell's belief, clamped to the log-odds bound.
    pub fn set_probability(&mut self, cell: usize, p: f64) -> Result<()> {
        self.check_cell(cell)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidState(format!("probability {p} outside [0, 1]")));
        }
        self.logodds[cell] = logit(p).clamp(-self.clamp, self.clamp);
        Ok(())
    }

    /// Bayesian log-odds update of one cell with an observation likelihood `p_obs`.
    pub fn fuse(&mut self, cell: usize, p_obs: f64) -> Result<()> {
        self.check_cell(cell)?;
        if !(p_obs > 0.0 && p_obs < 1.0) {
            return Err(Error::InvalidObservation(p_obs));
        }
        let l = &mut self.logodds[cell];
        *l = (*l + logit(p_obs)).clamp(-self.clamp, self.clamp);
        Ok(())
    }

    /// Fuses a batch of `(cell, p_obs)` observations in order.
    pub fn fuse_all(&mut self, observations: &[crate::sensor::Observation]) -> Result<()> {
        for obs in observations {
            self.fuse(obs.cell, obs.p_obs)?;
        }
        Ok(())
    }

    /// Sum of independent cell entropies, in bits.
    pub fn entropy(&self) -> f64 {
        self.logodds.iter().copied().map(logodds_entropy).sum()
    }

    pub fn cell_entropy(&self, cell: usize) -> f64 {
        logodds_entropy(self.logodds[cell])
    }

    /// Cells strictly between the non-weed and weed thresholds.
    pub fn unclassified(&self, thr: &ClassificationThresholds) -> Vec<usize> {
        let (lo, hi) = thr.logodds_bounds();
        (0..self.len())
            .filter(|&i| lo < self.logodds[i] && self.logodds[i] < hi)
            .collect()
    }

    pub fn unclassified_count(&self, thr: &ClassificationThresholds) -> usize {
        let (lo, hi) = thr.logodds_bounds();
        self.logodds.iter().filter(|&&l| lo < l && l < hi).count()
    }

    pub(crate) fn set_logodds(&mut self, cell: usize, l: f64) {
        self.logodds[cell] = l.clamp(-self.clamp, self.clamp);
    }

    /// Log-odds the cell would hold after fusing `p_obs`, without mutating.
    #[inline]
    pub fn fused_logodds(&self, cell: usize, p_obs: f64) -> f64 {
        (self.logodds[cell] + logit(p_obs)).clamp(-self.clamp, self.clamp)
    }

    /// Row-major probabilities, one map row per line, six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in 0..self.geometry.rows() {
            for col in 0..self.geometry.cols() {
                if col > 0 {
                    out.push(',');
                }
                let p = self.probability(self.geometry.index(col, row));
                let _ = write!(out, "{p:.6}");
            }
            out.push('\n');
        }
        out
    }

    /// Plain (P2) PGM image: dark pixels are likely weeds, north up.
    pub fn to_pgm(&self) -> String {
        let (cols, rows) = (self.geometry.cols(), self.geometry.rows());
        let mut out = format!("P2\n{cols} {rows}\n255\n");
        for row in (0..rows).rev() {
            let line: Vec<String> = (0..cols)
                .map(|col| {
                    let p = self.probability(self.geometry.index(col, row));
                    ((1.0 - p) * 255.0).round().to_string()
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.logodds.len() {
            return Err(Error::CellOutOfBounds {
                index: cell,
                cells: self.logodds.len(),
            });
        }
        Ok(())
    }
}

/// Latent weed field the simulated sensor observes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMap {
    geometry: GridGeometry,
    occupied: Vec<bool>,
}

impl GroundTruthMap {
    pub fn from_cells(geometry: GridGeometry, occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != geometry.cell_count() {
            return Err(Error::Config(format!(
                "ground truth has {} cells, geometry has {}",
                occupied.len(),
                geometry.cell_count()
            )));
        }
        Ok(Self { geometry, occupied })
    }

    /// Places exactly `weed_count` weeds uniformly without replacement.
    pub fn generate(geometry: GridGeometry, weed_count: usize, seed: u64) -> Result<Self> {
        let cells = geometry.cell_count();
        if weed_count > cells {
            return Err(Error::Config(format!(
                "weed_count {weed_count} exceeds the {cells} cells of the map"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut occupied = vec![false; cells];
        for i in rand::seq::index::sample(&mut rng, cells, weed_count) {
            occupied[i] = true;
        }
        Ok(Self { geometry, occupied })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn is_weed(&self, cell: usize) -> bool {
        self.occupied[cell]
    }

    pub fn cells(&self) -> &[bool] {
        &self.occupied
    }

    pub fn weed_count(&self) -> usize {
        self.occupied.iter().filter(|&&w| w).count()
    }
}
