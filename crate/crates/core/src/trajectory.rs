//! Minimum-snap polynomial paths through ordered viewpoints.
//!
//! Every segment is a degree-12 polynomial per axis written over normalized
//! time `tau = t / T` in `[0, 1]`. The decision variables are end-point
//! derivatives: orders 0 through 4 are shared at each joint (giving continuity
//! up to snap) and each segment owns three extra start derivatives (orders 5
//! to 7) that soak up the remaining coefficients. With positions and boundary
//! states fixed, the free derivatives minimizing integrated squared snap solve
//! an unconstrained quadratic program.

use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::Position;

pub const DEGREE: usize = 12;
const NCOEF: usize = DEGREE + 1;
/// Highest derivative order shared between adjacent segments.
pub const JOINT_ORDER: usize = 4;
const JOINT_VARS: usize = JOINT_ORDER + 1;
/// Start derivatives of orders 5..=7 local to each segment.
const LOCAL_VARS: usize = NCOEF - 2 * JOINT_VARS;
const COINCIDENT_M: f64 = 1e-9;

pub const FEASIBILITY_DT: f64 = 0.01;
const SCALE_STEP: f64 = 1.1;
const MAX_SCALE_ITERS: usize = 20;
// Durations are kept on a 2^-20 s grid so sums of them are exact.
const TIME_QUANTUM: f64 = 1.0 / 1_048_576.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicLimits {
    pub v_max: f64,
    pub a_max: f64,
}

impl Default for DynamicLimits {
    fn default() -> Self {
        Self {
            v_max: 5.0,
            a_max: 3.0,
        }
    }
}

impl DynamicLimits {
    pub fn new(v_max: f64, a_max: f64) -> Result<Self> {
        if !(v_max > 0.0 && a_max > 0.0) {
            return Err(Error::Config(format!(
                "dynamic limits must be positive, got v_max={v_max} a_max={a_max}"
            )));
        }
        Ok(Self { v_max, a_max })
    }
}

/// Box of admissible viewpoint positions: over the map, within altitude bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightEnvelope {
    pub min: Position,
    pub max: Position,
}

impl FlightEnvelope {
    pub fn new(geometry: &GridGeometry, alt_min: f64, alt_max: f64) -> Result<Self> {
        if !(alt_min > 0.0 && alt_min < alt_max) {
            return Err(Error::Config(format!(
                "flight envelope needs 0 < alt_min ({alt_min}) < alt_max ({alt_max})"
            )));
        }
        Ok(Self {
            min: Position::new(geometry.origin[0], geometry.origin[1], alt_min),
            max: Position::new(
                geometry.origin[0] + geometry.width_m,
                geometry.origin[1] + geometry.height_m,
                alt_max,
            ),
        })
    }

    pub fn alt_min(&self) -> f64 {
        self.min.z
    }

    pub fn alt_max(&self) -> f64 {
        self.max.z
    }

    pub fn contains(&self, p: &Position) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn clamp(&self, p: &Position) -> Position {
        Position::from_fn(|k, _| p[k].clamp(self.min[k], self.max[k]))
    }

    /// Total distance (meters, summed over axes) by which `p` leaves the box.
    pub fn violation(&self, p: &Position) -> f64 {
        (0..3)
            .map(|k| (self.min[k] - p[k]).max(0.0) + (p[k] - self.max[k]).max(0.0))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewpointKind {
    Global,
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub position: Position,
    pub kind: ViewpointKind,
}

impl Viewpoint {
    pub fn global(position: Position) -> Self {
        Self {
            position,
            kind: ViewpointKind::Global,
        }
    }

    pub fn intermediate(position: Position) -> Self {
        Self {
            position,
            kind: ViewpointKind::Intermediate,
        }
    }
}

/// Velocity and acceleration the path must start with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartState {
    pub velocity: Position,
    pub acceleration: Position,
}

impl StartState {
    pub fn rest() -> Self {
        Self {
            velocity: Position::zeros(),
            acceleration: Position::zeros(),
        }
    }
}

/// Position and its first two derivatives at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedState {
    pub t: f64,
    pub position: Position,
    pub velocity: Position,
    pub acceleration: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSegment {
    /// Per-axis coefficients in normalized time, lowest order first.
    pub coeffs: [[f64; NCOEF]; 3],
    pub duration_s: f64,
}

impl PolynomialSegment {
    /// Physical `order`-th time derivative at local time `t` in `[0, duration]`.
    pub fn derivative(&self, t: f64, order: usize) -> Position {
        let tau = t / self.duration_s;
        let scale = self.duration_s.powi(-(order as i32));
        Position::from_fn(|axis, _| scale * eval_poly_derivative(&self.coeffs[axis], tau, order))
    }

    /// Integrated squared snap over the segment, summed over axes.
    pub fn snap_cost(&self) -> f64 {
        let q = snap_gram();
        let scale = self.duration_s.powi(-7);
        self.coeffs
            .iter()
            .map(|c| {
                let c = SMatrix::<f64, NCOEF, 1>::from_column_slice(c);
                scale * (c.transpose() * q * c)[(0, 0)]
            })
            .sum()
    }
}

fn eval_poly_derivative(c: &[f64; NCOEF], tau: f64, order: usize) -> f64 {
    let mut acc = 0.0;
    for k in (order..NCOEF).rev() {
        acc = acc * tau + c[k] * falling(k, order);
    }
    acc
}

/// `k! / (k - r)!`
fn falling(k: usize, r: usize) -> f64 {
    ((k + 1 - r)..=k).map(|i| i as f64).product()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolynomialPath {
    pub segments: Vec<PolynomialSegment>,
    pub waypoints: Vec<Position>,
}

impl PolynomialPath {
    pub fn travel_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// Absolute arrival time at each waypoint (first is 0).
    pub fn arrival_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        out.push(0.0);
        for s in &self.segments {
            t += s.duration_s;
            out.push(t);
        }
        out
    }

    pub fn snap_cost(&self) -> f64 {
        self.segments.iter().map(PolynomialSegment::snap_cost).sum()
    }

    /// Appends `other`; its first waypoint is expected to equal our last.
    pub fn concat(mut self, other: PolynomialPath) -> PolynomialPath {
        let skip = usize::from(!self.waypoints.is_empty() && !other.waypoints.is_empty());
        self.waypoints.extend(other.waypoints.into_iter().skip(skip));
        self.segments.extend(other.segments);
        self
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let mut start = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if t < start + s.duration_s || i + 1 == self.segments.len() {
                return (i, (t - start).clamp(0.0, s.duration_s));
            }
            start += s.duration_s;
        }
        unreachable!("locate on an empty path")
    }

    /// `order`-th derivative at absolute time `t`, clamped to the path's span.
    pub fn derivative_at(&self, t: f64, order: usize) -> Position {
        let (i, local) = self.locate(t);
        self.segments[i].derivative(local, order)
    }

    pub fn state_at(&self, t: f64) -> TimedState {
        let (i, local) = self.locate(t);
        let seg = &self.segments[i];
        TimedState {
            t,
            position: seg.derivative(local, 0),
            velocity: seg.derivative(local, 1),
            acceleration: seg.derivative(local, 2),
        }
    }

    /// States at `0, dt, 2dt, ...` with the final instant always included.
    pub fn sample(&self, dt: f64) -> Vec<TimedState> {
        assert!(dt > 0.0, "sample spacing must be positive");
        if self.segments.is_empty() {
            return Vec::new();
        }
        let total = self.travel_time();
        let n = (total / dt + 1e-9).floor() as usize;
        let mut out: Vec<TimedState> = (0..=n)
            .map(|k| self.state_at((k as f64 * dt).min(total)))
            .collect();
        if out.last().is_some_and(|s| s.t < total * (1.0 - 1e-12)) {
            out.push(self.state_at(total));
        }
        out
    }

    /// Largest sampled speed and acceleration magnitude.
    pub fn max_dynamics(&self, dt: f64) -> (f64, f64) {
        self.sample(dt).iter().fold((0.0f64, 0.0f64), |(v, a), s| {
            (v.max(s.velocity.norm()), a.max(s.acceleration.norm()))
        })
    }

    /// Timed samples as `t,x,y,z,vx,vy,vz` rows offset by `t0`.
    pub fn to_csv_rows(&self, dt: f64, t0: f64, out: &mut String) {
        for s in self.sample(dt) {
            let (p, v) = (s.position, s.velocity);
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                t0 + s.t,
                p.x,
                p.y,
                p.z,
                v.x,
                v.y,
                v.z
            );
        }
    }
}

pub const PATH_CSV_HEADER: &str = "t,x,y,z,vx,vy,vz";

/// Nominal rest-to-rest time for a straight leg under a trapezoidal speed profile.
pub fn allocate_time(p0: &Position, p1: &Position, limits: &DynamicLimits) -> f64 {
    let d = (p1 - p0).norm();
    let (v, a) = (limits.v_max, limits.a_max);
    if d >= v * v / a {
        d / v + v / a
    } else {
        2.0 * (d / a).sqrt()
    }
}

fn quantize_up(t: f64) -> f64 {
    (t / TIME_QUANTUM).ceil() * TIME_QUANTUM
}

/// Plans a minimum-snap path through `waypoints`, ending at rest, with
/// durations stretched until sampled speed and acceleration respect `limits`.
pub fn plan_segments(
    waypoints: &[Position],
    limits: &DynamicLimits,
    start: &StartState,
) -> Result<PolynomialPath> {
    check_waypoints(waypoints)?;
    let mut durations: Vec<f64> = waypoints
        .windows(2)
        .map(|w| quantize_up(allocate_time(&w[0], &w[1], limits)))
        .collect();
    let v_lim = limits.v_max * (1.0 + 1e-9);
    let a_lim = limits.a_max * (1.0 + 1e-9);
    for _ in 0..=MAX_SCALE_ITERS {
        let path = MinSnapProblem::new(waypoints.to_vec(), durations.clone(), *start)?.solve()?;
        let (v, a) = path.max_dynamics(FEASIBILITY_DT);
        if v <= v_lim && a <= a_lim {
            return Ok(path);
        }
        // Uniform scaling by k divides speed by k and acceleration by k^2.
        let needed = (v / limits.v_max).max((a / limits.a_max).sqrt()) * (1.0 + 1e-3);
        let factor = needed.max(SCALE_STEP);
        for d in &mut durations {
            *d = quantize_up(*d * factor);
        }
    }
    Err(Error::Infeasible {
        iterations: MAX_SCALE_ITERS,
    })
}

fn check_waypoints(waypoints: &[Position]) -> Result<()> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidState(format!(
            "a path needs at least 2 waypoints, got {}",
            waypoints.len()
        )));
    }
    for (i, w) in waypoints.windows(2).enumerate() {
        if (w[1] - w[0]).norm() <= COINCIDENT_M {
            return Err(Error::DegenerateSegment { index: i });
        }
    }
    Ok(())
}

/// Minimum-snap problem with fixed segment durations.
#[derive(Debug, Clone)]
pub struct MinSnapProblem {
    waypoints: Vec<Position>,
    durations: Vec<f64>,
    start: StartState,
    fixed: Vec<bool>,
}

impl MinSnapProblem {
    pub fn new(waypoints: Vec<Position>, durations: Vec<f64>, start: StartState) -> Result<Self> {
        check_waypoints(&waypoints)?;
        if durations.len() + 1 != waypoints.len() {
            return Err(Error::InvalidState(format!(
                "{} durations for {} waypoints",
                durations.len(),
                waypoints.len()
            )));
        }
        if let Some(segment) = durations.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::IllConditioned { segment });
        }
        let segments = durations.len();
        let n = Self::var_count(segments);
        let mut fixed = vec![false; n];
        for joint in 0..=segments {
            fixed[joint * JOINT_VARS] = true;
        }
        for order in 1..=2 {
            fixed[order] = true;
            fixed[segments * JOINT_VARS + order] = true;
        }
        Ok(Self {
            waypoints,
            durations,
            start,
            fixed,
        })
    }

    fn var_count(segments: usize) -> usize {
        (segments + 1) * JOINT_VARS + segments * LOCAL_VARS
    }

    fn segments(&self) -> usize {
        self.durations.len()
    }

    /// Number of free derivative variables per axis.
    pub fn free_count(&self) -> usize {
        self.fixed.iter().filter(|&&f| !f).count()
    }

    fn segment_of(&self, var: usize) -> usize {
        let joint_block = (self.segments() + 1) * JOINT_VARS;
        if var < joint_block {
            (var / JOINT_VARS).min(self.segments() - 1)
        } else {
            (var - joint_block) / LOCAL_VARS
        }
    }

    /// Global variable indices and physical derivative orders of the 13
    /// end-point values of `segment`, in the row order of the boundary map.
    fn segment_vars(&self, segment: usize) -> [(usize, i32); NCOEF] {
        let joint_block = (self.segments() + 1) * JOINT_VARS;
        let mut out = [(0usize, 0i32); NCOEF];
        for r in 0..JOINT_VARS {
            out[r] = (segment * JOINT_VARS + r, r as i32);
            out[JOINT_VARS + LOCAL_VARS + r] = ((segment + 1) * JOINT_VARS + r, r as i32);
        }
        for r in 0..LOCAL_VARS {
            out[JOINT_VARS + r] = (joint_block + segment * LOCAL_VARS + r, (JOINT_VARS + r) as i32);
        }
        out
    }

    /// Maps physical end-point values of one segment to its coefficients.
    fn coefficient_map(&self, segment: usize) -> SMatrix<f64, NCOEF, NCOEF> {
        let t = self.durations[segment];
        let vars = self.segment_vars(segment);
        let mut scale = SMatrix::<f64, NCOEF, NCOEF>::zeros();
        for (row, &(_, order)) in vars.iter().enumerate() {
            scale[(row, row)] = t.powi(order);
        }
        boundary_inverse() * scale
    }

    fn fixed_values(&self) -> Vec<Position> {
        let n = Self::var_count(self.segments());
        let mut values = vec![Position::zeros(); n];
        for (joint, w) in self.waypoints.iter().enumerate() {
            values[joint * JOINT_VARS] = *w;
        }
        values[1] = self.start.velocity;
        values[2] = self.start.acceleration;
        values
    }

    fn hessian(&self) -> DMatrix<f64> {
        let n = Self::var_count(self.segments());
        let mut h = DMatrix::<f64>::zeros(n, n);
        let q = snap_gram();
        for s in 0..self.segments() {
            let m = self.coefficient_map(s);
            let local = m.transpose() * q * m * self.durations[s].powi(-7);
            let vars = self.segment_vars(s);
            for (i, &(gi, _)) in vars.iter().enumerate() {
                for (j, &(gj, _)) in vars.iter().enumerate() {
                    h[(gi, gj)] += local[(i, j)];
                }
            }
        }
        h
    }

    /// Builds the path for the given free-variable values (per axis).
    pub fn path_with_free(&self, free: &[Position]) -> PolynomialPath {
        let mut values = self.fixed_values();
        let mut it = free.iter();
        for (v, _) in values.iter_mut().zip(&self.fixed).filter(|(_, &f)| !f) {
            *v = *it.next().expect("free value count mismatch");
        }
        self.path_from_values(&values)
    }

    fn path_from_values(&self, values: &[Position]) -> PolynomialPath {
        let segments = (0..self.segments())
            .map(|s| {
                let m = self.coefficient_map(s);
                let vars = self.segment_vars(s);
                let mut coeffs = [[0.0; NCOEF]; 3];
                for (axis, c) in coeffs.iter_mut().enumerate() {
                    let d = SMatrix::<f64, NCOEF, 1>::from_fn(|i, _| values[vars[i].0][axis]);
                    let sol = m * d;
                    c.copy_from_slice(sol.as_slice());
                }
                PolynomialSegment {
                    coeffs,
                    duration_s: self.durations[s],
                }
            })
            .collect();
        PolynomialPath {
            segments,
            waypoints: self.waypoints.clone(),
        }
    }

    /// Optimal free values, one `Position` (x, y, z) per free variable.
    pub fn solve_free(&self) -> Result<Vec<Position>> {
        let h = self.hessian();
        let values = self.fixed_values();
        let free: Vec<usize> = (0..self.fixed.len()).filter(|&i| !self.fixed[i]).collect();
        let fixed: Vec<usize> = (0..self.fixed.len()).filter(|&i| self.fixed[i]).collect();
        let nf = free.len();
        // Jacobi scaling tames the T^-7 spread between short and long segments.
        let scale: Vec<f64> = free
            .iter()
            .map(|&i| {
                let d = h[(i, i)];
                if d > 0.0 && d.is_finite() {
                    d.sqrt().recip()
                } else {
                    1.0
                }
            })
            .collect();
        let hff = DMatrix::from_fn(nf, nf, |i, j| h[(free[i], free[j])] * scale[i] * scale[j]);
        let mut rhs = DMatrix::<f64>::zeros(nf, 3);
        for (i, &fi) in free.iter().enumerate() {
            for &cj in &fixed {
                let hij = h[(fi, cj)];
                if hij != 0.0 {
                    for axis in 0..3 {
                        rhs[(i, axis)] -= hij * values[cj][axis] * scale[i];
                    }
                }
            }
        }
        let l = cholesky(&hff).map_err(|pivot| Error::IllConditioned {
            segment: self.segment_of(free[pivot]),
        })?;
        let y = cholesky_solve(&l, &rhs);
        Ok((0..nf)
            .map(|i| Position::new(y[(i, 0)], y[(i, 1)], y[(i, 2)]) * scale[i])
            .collect())
    }

    pub fn solve(&self) -> Result<PolynomialPath> {
        let free = self.solve_free()?;
        Ok(self.path_with_free(&free))
    }
}

/// Lower Cholesky factor, or the index of the first non-positive pivot.
fn cholesky(a: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, usize> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 1e-13 * a[(j, j)].abs().max(f64::MIN_POSITIVE)) || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = y[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * y[(k, c)];
            }
            y[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[(k, c)];
            }
            y[(i, c)] = s / l[(i, i)];
        }
    }
    y
}

/// `Q[j][k] = integral over [0,1] of the 4th derivatives of tau^j and tau^k`.
fn snap_gram() -> &'static SMatrix<f64, NCOEF, NCOEF> {
    static Q: OnceLock<SMatrix<f64, NCOEF, NCOEF>> = OnceLock::new();
    Q.get_or_init(|| {
        SMatrix::from_fn(|j, k| {
            if j < 4 || k < 4 {
                0.0
            } else {
                falling(j, 4) * falling(k, 4) / (j + k - 7) as f64
            }
        })
    })
}

/// Inverse of the map from coefficients to normalized end-point derivatives
/// (orders 0..=7 at tau = 0, then orders 0..=4 at tau = 1).
fn boundary_inverse() -> &'static SMatrix<f64, NCOEF, NCOEF> {
    static INV: OnceLock<SMatrix<f64, NCOEF, NCOEF>> = OnceLock::new();
    INV.get_or_init(|| {
        let start_rows = JOINT_VARS + LOCAL_VARS;
        let a = SMatrix::<f64, NCOEF, NCOEF>::from_fn(|row, k| {
            if row < start_rows {
                if k == row {
                    falling(k, k)
                } else {
                    0.0
                }
            } else {
                let r = row - start_rows;
                if k >= r {
                    falling(k, r)
                } else {
                    0.0
                }
            }
        });
        a.try_inverse().expect("boundary map is nonsingular")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lim(v: f64, a: f64) -> DynamicLimits {
        DynamicLimits::new(v, a).unwrap()
    }

    #[test]
    fn allocate_time_regimes() {
        let l = lim(2.0, 2.0);
        let o = Position::zeros();
        assert_abs_diff_eq!(allocate_time(&o, &Position::new(10.0, 0.0, 0.0), &l), 6.0);
        assert_abs_diff_eq!(
            allocate_time(&o, &Position::new(0.25, 0.0, 0.0), &l),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-8
        );
        assert!(allocate_time(&o, &Position::new(1e-12, 0.0, 0.0), &l) < 1e-5);
        let mut prev = 0.0;
        for i in 1..400 {
            let t = allocate_time(&o, &Position::new(i as f64 * 0.05, 0.0, 0.0), &l);
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn boundary_map_round_trips() {
        let inv = boundary_inverse();
        // tau^12: derivatives at tau = 0 vanish, at tau = 1 they are falling(12, r).
        let mut d = SMatrix::<f64, NCOEF, 1>::zeros();
        for r in 0..JOINT_VARS {
            d[JOINT_VARS + LOCAL_VARS + r] = falling(12, r);
        }
        let c = inv * d;
        for k in 0..NCOEF {
            let expect = if k == 12 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(c[k], expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn straight_rest_to_rest_respects_limits() {
        let w = [Position::zeros(), Position::new(10.0, 0.0, 0.0)];
        let l = lim(2.0, 2.0);
        let path = plan_segments(&w, &l, &StartState::rest()).unwrap();
        let samples = path.sample(FEASIBILITY_DT);
        assert_abs_diff_eq!(samples[0].position, w[0], epsilon = 1e-9);
        let last = samples.last().unwrap();
        assert_abs_diff_eq!(last.position, w[1], epsilon = 1e-6);
        assert_abs_diff_eq!(last.t, path.travel_time());
        for s in &samples {
            assert!(s.velocity.norm() <= 2.0 * (1.0 + 1e-6));
            assert!(s.acceleration.norm() <= 2.0 * (1.0 + 1e-6));
        }
        assert!(path.travel_time() >= 5.0);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        let p = Position::new(1.0, 2.0, 3.0);
        assert_eq!(
            plan_segments(&[p, p], &lim(2.0, 2.0), &StartState::rest()),
            Err(Error::DegenerateSegment { index: 0 })
        );
        assert!(matches!(
            plan_segments(&[p], &lim(2.0, 2.0), &StartState::rest()),
            Err(Error::InvalidState(_))
        ));
        let q = Position::new(3.0, 2.0, 3.0);
        assert_eq!(
            MinSnapProblem::new(vec![p, q], vec![0.0], StartState::rest()).err(),
            Some(Error::IllConditioned { segment: 0 })
        );
    }

    #[test]
    fn sample_endpoints() {
        let w = [Position::zeros(), Position::new(3.0, 4.0, 0.0)];
        let path = plan_segments(&w, &lim(5.0, 3.0), &StartState::rest()).unwrap();
        let total = path.travel_time();
        let s = path.sample(total);
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].t, total);
        assert!(PolynomialPath::default().sample(0.1).is_empty());
        assert_eq!(PolynomialPath::default().travel_time(), 0.0);
    }

    #[test]
    fn arc_length_exceeds_chord() {
        let w = [
            Position::new(0.0, 0.0, 10.0),
            Position::new(10.0, 5.0, 12.0),
            Position::new(20.0, 0.0, 8.0),
        ];
        let path = plan_segments(&w, &lim(5.0, 3.0), &StartState::rest()).unwrap();
        let dt = 0.001;
        let samples = path.sample(dt);
        // trapezoidal quadrature of speed
        let arc: f64 = samples
            .windows(2)
            .map(|p| 0.5 * (p[1].t - p[0].t) * (p[0].velocity.norm() + p[1].velocity.norm()))
            .sum();
        let chord = (w[2] - w[0]).norm();
        let polyline = (w[1] - w[0]).norm() + (w[2] - w[1]).norm();
        assert!(arc >= chord);
        assert!(arc >= polyline * (1.0 - 1e-6));
    }

    #[test]
    fn travel_time_is_additive() {
        let l = lim(5.0, 3.0);
        let a = plan_segments(
            &[
                Position::zeros(),
                Position::new(7.3, 1.1, 2.0),
                Position::new(9.0, 9.0, 9.0),
            ],
            &l,
            &StartState::rest(),
        )
        .unwrap();
        let b = plan_segments(
            &[Position::new(9.0, 9.0, 9.0), Position::new(1.7, 3.3, 5.1)],
            &l,
            &StartState::rest(),
        )
        .unwrap();
        let (ta, tb) = (a.travel_time(), b.travel_time());
        assert_eq!(a.concat(b).travel_time(), ta + tb);
    }

    #[test]
    fn optimum_is_stationary() {
        let w = vec![
            Position::new(0.0, 0.0, 10.0),
            Position::new(8.0, 3.0, 12.0),
            Position::new(15.0, -2.0, 6.0),
            Position::new(20.0, 4.0, 9.0),
        ];
        let problem = MinSnapProblem::new(w, vec![4.0, 3.0, 5.0], StartState::rest()).unwrap();
        let best = problem.solve_free().unwrap();
        let base = problem.path_with_free(&best).snap_cost();
        let eps = 1e-3;
        for i in 0..best.len() {
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut x = best.clone();
                    x[i][axis] += sign * eps;
                    let cost = problem.path_with_free(&x).snap_cost();
                    assert!(cost >= base * (1.0 - 1e-9), "var {i} axis {axis}");
                }
            }
        }
    }

    #[test]
    fn envelope_clamp_and_violation() {
        let g = GridGeometry::square(50.0).unwrap();
        let env = FlightEnvelope::new(&g, 2.0, 45.0).unwrap();
        let p = Position::new(-1.0, 60.0, 1.0);
        assert_eq!(env.clamp(&p), Position::new(0.0, 50.0, 2.0));
        assert_abs_diff_eq!(env.violation(&p), 12.0);
        assert_eq!(env.violation(&Position::new(25.0, 25.0, 10.0)), 0.0);
        assert!(FlightEnvelope::new(&g, 45.0, 2.0).is_err());
    }
}
