use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::sensor::SensorModel;
use crate::trajectory::FlightEnvelope;
use crate::Position;

/// One altitude layer of the candidate lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeLevel {
    pub altitude: f64,
    /// Footprint side at `altitude`.
    pub footprint: f64,
    /// Point spacing along x and y; never larger than `footprint`.
    pub spacing: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

/// Candidate viewpoints on altitude layers with footprint-sized spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub levels: Vec<LatticeLevel>,
    /// Level by level from the top, row-major within a level.
    pub points: Vec<Position>,
}

impl Lattice {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn lowest_altitude(&self) -> Option<f64> {
        self.levels.iter().map(|l| l.altitude).reduce(f64::min)
    }
}

/// Level `k` flies at `alt_max / 2^k` (floored at `alt_min`). Each level
/// splits the map into the fewest equal tiles no larger than its footprint
/// and puts one point over each tile center, so every level covers the whole
/// field. Levels that collapse onto `alt_min` are only emitted once.
pub fn build_lattice(
    geometry: &GridGeometry,
    sensor: &SensorModel,
    envelope: &FlightEnvelope,
    levels: usize,
) -> Result<Lattice> {
    if levels == 0 {
        return Err(Error::Config("lattice needs at least one level".into()));
    }
    let [ox, oy] = geometry.origin;
    let mut out = Lattice {
        levels: Vec::new(),
        points: Vec::new(),
    };
    for k in 0..levels {
        let altitude = (envelope.alt_max() / 2f64.powi(k as i32)).max(envelope.alt_min());
        if out.levels.last().is_some_and(|l| l.altitude == altitude) {
            break;
        }
        let footprint = sensor.footprint_side(altitude);
        let count = |extent: f64| ((extent / footprint) - 1e-9).ceil().max(1.0) as usize;
        let (nx, ny) = (count(geometry.width_m), count(geometry.height_m));
        let spacing = [geometry.width_m / nx as f64, geometry.height_m / ny as f64];
        for j in 0..ny {
            for i in 0..nx {
                let x = ox + (i as f64 + 0.5) * spacing[0];
                let y = oy + (j as f64 + 0.5) * spacing[1];
                out.points.push(Position::new(x, y, altitude));
            }
        }
        out.levels.push(LatticeLevel {
            altitude,
            footprint,
            spacing,
            nx,
            ny,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn setup() -> (GridGeometry, SensorModel, FlightEnvelope) {
        let g = GridGeometry::square(50.0).unwrap();
        let env = FlightEnvelope::new(&g, 2.0, 45.0).unwrap();
        (g, SensorModel::default(), env)
    }

    #[test]
    fn single_level_is_map_centre() {
        let (g, s, env) = setup();
        let l = build_lattice(&g, &s, &env, 1).unwrap();
        assert_eq!(l.points, vec![Position::new(25.0, 25.0, 45.0)]);
        assert_abs_diff_eq!(l.levels[0].footprint, 90.0, epsilon = 1e-9);
    }

    #[test]
    fn three_levels() {
        let (g, s, env) = setup();
        let l = build_lattice(&g, &s, &env, 3).unwrap();
        let alts: Vec<f64> = l.levels.iter().map(|v| v.altitude).collect();
        assert_eq!(alts, vec![45.0, 22.5, 11.25]);
        let counts: Vec<usize> = l.levels.iter().map(|v| v.nx * v.ny).collect();
        assert_eq!(counts, vec![1, 4, 9]);
        assert_eq!(l.len(), 14);
        for (lvl, expect) in l.levels.iter().zip([90.0, 45.0, 22.5]) {
            assert_abs_diff_eq!(lvl.footprint, expect, epsilon = 1e-9);
            assert!(lvl.spacing.iter().all(|s| *s <= lvl.footprint));
        }
        let mid: Vec<(f64, f64)> = l.points[1..5].iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(mid, vec![(12.5, 12.5), (37.5, 12.5), (12.5, 37.5), (37.5, 37.5)]);
    }

    #[test]
    fn points_stay_in_envelope_and_tile_the_map() {
        let (g, s, env) = setup();
        for levels in 1..8 {
            let l = build_lattice(&g, &s, &env, levels).unwrap();
            assert!(l.points.iter().all(|p| env.contains(p)));
            for lvl in &l.levels {
                let pts: Vec<&Position> = l.points.iter().filter(|p| p.z == lvl.altitude).collect();
                for cell in 0..g.cell_count() {
                    let c = g.cell_center(cell);
                    assert!(pts.iter().any(|p| { s.footprint_at(p).unwrap().contains(c) }));
                }
            }
        }
        assert!(build_lattice(&g, &s, &env, 0).is_err());
    }

    #[test]
    fn levels_floor_at_alt_min() {
        let (g, s, env) = setup();
        let l = build_lattice(&g, &s, &env, 10).unwrap();
        assert_eq!(l.lowest_altitude(), Some(2.0));
        assert_eq!(l.levels.iter().filter(|v| v.altitude == 2.0).count(), 1);
    }
}
