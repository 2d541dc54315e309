//! Spatial layout of one sensing setting: a hardcore UAV point cloud inside a
//! box and a radar placed uniformly at a fixed altitude.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Proposals tried before giving up on a hardcore configuration.
pub const DEFAULT_PACKING_BUDGET: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn horizontal_distance(&self, other: &Position3D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Extent of the operating volume; every coordinate lies in `[0, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_max: f64,
    pub y_max: f64,
    pub z_max: f64,
}

impl Bounds {
    pub const fn new(x_max: f64, y_max: f64, z_max: f64) -> Self {
        Self { x_max, y_max, z_max }
    }

    pub fn contains(&self, p: &Position3D) -> bool {
        (0.0..=self.x_max).contains(&p.x)
            && (0.0..=self.y_max).contains(&p.y)
            && (0.0..=self.z_max).contains(&p.z)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Position3D {
        Position3D::new(
            self.x_max * rng.random::<f64>(),
            self.y_max * rng.random::<f64>(),
            self.z_max * rng.random::<f64>(),
        )
    }
}

/// UAV and radar positions for one setting, with the derived link geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry {
    pub uav_positions: Vec<Position3D>,
    pub radar_position: Position3D,
    /// Radar-to-UAV distances in meters.
    pub distances: Vec<f64>,
    /// Elevation angles in degrees, positive when the UAV is above the radar.
    pub elevations: Vec<f64>,
}

impl SceneGeometry {
    pub fn new(uav_positions: Vec<Position3D>, radar_position: Position3D) -> Result<Self> {
        let distances = uav_positions
            .iter()
            .map(|u| distance(u, &radar_position))
            .collect();
        let elevations = uav_positions
            .iter()
            .map(|u| elevation_angle(u, &radar_position))
            .collect::<Result<_>>()?;
        Ok(Self {
            uav_positions,
            radar_position,
            distances,
            elevations,
        })
    }

    /// Draws a complete layout: `n` hardcore UAVs plus one radar at `z_radar`.
    pub fn generate<R: Rng + ?Sized>(
        n: usize,
        d_min: f64,
        bounds: Bounds,
        z_radar: f64,
        budget: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let uavs = sample_uav_positions_with_budget(n, d_min, bounds, budget, rng)?;
        let radar = sample_radar_position(bounds.x_max, bounds.y_max, z_radar, rng);
        Self::new(uavs, radar)
    }

    pub fn len(&self) -> usize {
        self.uav_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uav_positions.is_empty()
    }

    /// Smallest pairwise UAV separation, `f64::INFINITY` for fewer than two UAVs.
    pub fn min_separation(&self) -> f64 {
        min_pairwise_distance(&self.uav_positions)
    }
}

pub fn min_pairwise_distance(points: &[Position3D]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min(distance(a, b));
        }
    }
    best
}

/// Samples exactly `n` UAV positions with pairwise separation at least `d_min`.
pub fn sample_uav_positions<R: Rng + ?Sized>(
    n: usize,
    d_min: f64,
    bounds: Bounds,
    rng: &mut R,
) -> Result<Vec<Position3D>> {
    sample_uav_positions_with_budget(n, d_min, bounds, DEFAULT_PACKING_BUDGET, rng)
}

/// Matern type II hardcore sampling conditioned on exactly `n` survivors.
///
/// Each proposal scatters a Poisson number of parents uniformly in the box,
/// gives every parent a uniform mark, and deletes each parent that has an
/// older (smaller-mark) parent closer than `d_min`. A proposal is accepted
/// only when exactly `n` parents survive. The parent intensity is steered
/// between proposals toward the value that yields `n` survivors.
pub fn sample_uav_positions_with_budget<R: Rng + ?Sized>(
    n: usize,
    d_min: f64,
    bounds: Bounds,
    budget: usize,
    rng: &mut R,
) -> Result<Vec<Position3D>> {
    if n == 0 {
        return Err(Error::validation("num_uavs", "must be at least 1"));
    }
    if !(d_min > 0.0 && d_min.is_finite()) {
        return Err(Error::validation("d_min", format!("must be positive, got {d_min}")));
    }
    let target = n as f64;
    let ceiling = 64.0 * target;
    let mut mean = target;
    let mut best = 0;
    for _ in 0..budget {
        let count = Poisson::new(mean)
            .map(|p| p.sample(rng) as usize)
            .unwrap_or(n);
        let mut parents: Vec<(f64, Position3D)> = (0..count)
            .map(|_| (rng.random::<f64>(), bounds.sample(rng)))
            .collect();
        parents.sort_by(|a, b| a.0.total_cmp(&b.0));
        let survivors = thin_type_ii(&parents, d_min);
        if survivors.len() == n {
            return Ok(survivors);
        }
        best = best.max(survivors.len());
        let ratio = target / survivors.len().max(1) as f64;
        mean = (mean * ratio.sqrt()).clamp(1.0, ceiling);
    }
    Err(Error::PackingFailure {
        requested: n,
        d_min,
        attempts: budget,
        best,
    })
}

/// `parents` must be sorted by ascending mark (oldest first).
fn thin_type_ii(parents: &[(f64, Position3D)], d_min: f64) -> Vec<Position3D> {
    parents
        .iter()
        .enumerate()
        .filter(|(i, (_, p))| parents[..*i].iter().all(|(_, q)| distance(p, q) >= d_min))
        .map(|(_, (_, p))| *p)
        .collect()
}

pub fn sample_radar_position<R: Rng + ?Sized>(
    x_max: f64,
    y_max: f64,
    z_radar: f64,
    rng: &mut R,
) -> Position3D {
    Position3D::new(x_max * rng.random::<f64>(), y_max * rng.random::<f64>(), z_radar)
}

pub fn distance(a: &Position3D, b: &Position3D) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Elevation of `uav` seen from `radar`, in degrees within `[-90, 90]`.
pub fn elevation_angle(uav: &Position3D, radar: &Position3D) -> Result<f64> {
    let dz = uav.z - radar.z;
    let horizontal = uav.horizontal_distance(radar);
    if dz == 0.0 && horizontal == 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    Ok(dz.atan2(horizontal).to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    const BOX: Bounds = Bounds::new(5000.0, 5000.0, 120.0);

    #[test]
    fn single_uav_lands_in_box() {
        let mut rng = substream(1, &[]);
        let pts = sample_uav_positions(1, 50.0, BOX, &mut rng).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(BOX.contains(&pts[0]));
    }

    #[test]
    fn sixteen_uavs_respect_minimum_distance() {
        let mut rng = substream(2, &[]);
        for _ in 0..20 {
            let pts = sample_uav_positions(16, 100.0, BOX, &mut rng).unwrap();
            assert_eq!(pts.len(), 16);
            assert!(min_pairwise_distance(&pts) >= 100.0);
            assert!(pts.iter().all(|p| BOX.contains(p)));
        }
    }

    #[test]
    fn infeasible_separation_exhausts_budget() {
        let mut rng = substream(3, &[]);
        let err = sample_uav_positions(2, 7000.0, BOX, &mut rng).unwrap_err();
        match err {
            Error::PackingFailure { requested, attempts, best, .. } => {
                assert_eq!(requested, 2);
                assert_eq!(attempts, DEFAULT_PACKING_BUDGET);
                assert_eq!(best, 1);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn two_uniform_points_rarely_clear_7000_m() {
        // Rejection-count oracle: the box diagonal is only ~7072 m, so two
        // uniform points almost never sit 7000 m apart.
        let mut rng = substream(4, &[]);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| distance(&BOX.sample(&mut rng), &BOX.sample(&mut rng)) >= 7000.0)
            .count();
        assert!((hits as f64 / trials as f64) < 1e-4, "hits = {hits}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = sample_uav_positions(16, 100.0, BOX, &mut substream(9, &[1])).unwrap();
        let b = sample_uav_positions(16, 100.0, BOX, &mut substream(9, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn radar_on_degenerate_plane() {
        let p = sample_radar_position(0.0, 0.0, 40.0, &mut substream(1, &[]));
        assert_eq!(p, Position3D::new(0.0, 0.0, 40.0));
    }

    #[test]
    fn radar_altitude_is_exact_and_mean_is_central() {
        let mut rng = substream(5, &[]);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let p = sample_radar_position(5000.0, 5000.0, 40.0, &mut rng);
            assert_eq!(p.z, 40.0);
            sum += p.x;
        }
        let sigma = 5000.0 / 12f64.sqrt();
        assert!((sum / n as f64 - 2500.0).abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn distance_examples() {
        let origin = Position3D::new(0.0, 0.0, 0.0);
        assert_eq!(distance(&Position3D::new(3.0, 4.0, 12.0), &origin), 13.0);
        assert_eq!(distance(&origin, &origin), 0.0);
        let d = distance(&Position3D::new(100.0, 200.0, 120.0), &Position3D::new(50.0, 50.0, 40.0));
        assert!((d - (50f64.powi(2) + 150f64.powi(2) + 80f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!((d - 177.2005).abs() < 1e-4);
    }

    #[test]
    fn elevation_examples() {
        let radar = Position3D::new(0.0, 0.0, 0.0);
        let e = elevation_angle(&Position3D::new(100.0, 0.0, 100.0), &radar).unwrap();
        assert!((e - 45.0).abs() < 1e-12);
        assert_eq!(elevation_angle(&Position3D::new(30.0, 40.0, 0.0), &radar).unwrap(), 0.0);
        assert_eq!(elevation_angle(&Position3D::new(0.0, 0.0, 5.0), &radar).unwrap(), 90.0);
        assert_eq!(elevation_angle(&Position3D::new(0.0, 0.0, -5.0), &radar).unwrap(), -90.0);
        assert!(matches!(elevation_angle(&radar, &radar), Err(Error::DegenerateGeometry)));
    }

    fn point() -> impl Strategy<Value = Position3D> {
        (-1e4..1e4f64, -1e4..1e4f64, -1e3..1e3f64).prop_map(|(x, y, z)| Position3D::new(x, y, z))
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in point(), b in point(), c in point()) {
            prop_assert_eq!(distance(&a, &b), distance(&b, &a));
            prop_assert!(distance(&a, &c) <= distance(&a, &b) + distance(&b, &c) + 1e-9);
        }

        #[test]
        fn elevation_sign_follows_height(a in point(), b in point()) {
            prop_assume!(a != b);
            let e = elevation_angle(&a, &b).unwrap();
            prop_assert!((-90.0..=90.0).contains(&e));
            prop_assert_eq!(e.partial_cmp(&0.0), (a.z - b.z).partial_cmp(&0.0));
        }
    }
}
