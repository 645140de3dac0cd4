//! Network deployment, UAV trajectories and per-link geometry.
//!
//! Planar coordinates are in kilometres, heights and path lengths in metres,
//! angles in degrees at every public boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};

/// A point in the horizontal plane (km).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Point2 {
        Point2::new(self.x + dx, self.y + dy)
    }
}

/// Axis-aligned rectangle (km).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: Point2,
    pub max: Point2,
}

impl Region {
    pub fn new(min: Point2, max: Point2) -> Result<Self> {
        let region = Self { min, max };
        if !(region.width() > 0.0 && region.height() > 0.0) {
            return Err(invalid(format!(
                "region must have positive area, got {:?}..{:?}",
                min, max
            )));
        }
        Ok(region)
    }

    pub fn square(side_km: f64) -> Result<Self> {
        Self::new(Point2::new(0.0, 0.0), Point2::new(side_km, side_km))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Smallest rectangle holding every point, grown by `margin_km` on each side.
    pub fn bounding(points: &[Point2], margin_km: f64) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| invalid("cannot bound an empty point set"))?;
        let (mut min, mut max) = (*first, *first);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Self::new(
            min.offset(-margin_km, -margin_km),
            max.offset(margin_km, margin_km),
        )
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Region {
        Region {
            min: self.min.offset(dx, dy),
            max: self.max.offset(dx, dy),
        }
    }
}

/// One draw of the ground base station deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub gbs_positions: Vec<Point2>,
    /// Common GBS antenna height (m).
    pub h_gbs: f64,
    /// Common GBS transmit power (dBm).
    pub p_gbs_dbm: f64,
    /// GBS/km².
    pub density: f64,
    pub region: Region,
}

impl NetworkRealization {
    pub fn len(&self) -> usize {
        self.gbs_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gbs_positions.is_empty()
    }
}

/// Parameters shared by every GBS of a deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeploymentConfig {
    /// GBS/km².
    pub density: f64,
    /// m
    pub h_gbs: f64,
    /// dBm
    pub p_gbs_dbm: f64,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            density: 1.0,
            h_gbs: 30.0,
            p_gbs_dbm: 46.0,
        }
    }
}

impl DeploymentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(invalid(format!(
                "GBS density must be positive, got {}",
                self.density
            )));
        }
        if !(self.h_gbs > 0.0) {
            return Err(invalid(format!(
                "GBS height must be positive, got {}",
                self.h_gbs
            )));
        }
        if !self.p_gbs_dbm.is_finite() {
            return Err(invalid("GBS transmit power must be finite"));
        }
        Ok(())
    }
}

/// Draws a homogeneous Poisson point process on `region`, deterministically from `seed`.
pub fn generate_network(
    deployment: &DeploymentConfig,
    region: Region,
    seed: u64,
) -> Result<NetworkRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_network_with(deployment, region, &mut rng)
}

pub fn generate_network_with<R: Rng + ?Sized>(
    deployment: &DeploymentConfig,
    region: Region,
    rng: &mut R,
) -> Result<NetworkRealization> {
    deployment.validate()?;
    if !(region.area() > 0.0) {
        return Err(invalid("region must have positive area"));
    }
    let mean = deployment.density * region.area();
    let count = Poisson::new(mean)
        .map_err(|e| Error::Internal(format!("poisson({mean}): {e}")))?
        .sample(rng) as usize;
    let gbs_positions = (0..count)
        .map(|_| {
            Point2::new(
                region.min.x + rng.random::<f64>() * region.width(),
                region.min.y + rng.random::<f64>() * region.height(),
            )
        })
        .collect();
    Ok(NetworkRealization {
        gbs_positions,
        h_gbs: deployment.h_gbs,
        p_gbs_dbm: deployment.p_gbs_dbm,
        density: deployment.density,
        region,
    })
}

/// Number of measurement instants in `[0, duration_s]` spaced `period_ms` apart.
pub fn sample_count(duration_s: f64, period_ms: f64) -> usize {
    // Guard against 12000/40 landing a hair under 300.
    (duration_s * 1000.0 / period_ms + 1e-9).floor() as usize + 1
}

/// Constant-speed, constant-height straight flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    /// km
    pub start: Point2,
    /// rad, counter-clockwise from +x
    pub heading: f64,
    /// km/h
    pub speed_kmh: f64,
    /// m
    pub h_uav: f64,
    /// s
    pub duration_s: f64,
    /// Measurement gap (ms).
    pub sample_period_ms: f64,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_kmh >= 0.0 && self.speed_kmh.is_finite()) {
            return Err(invalid(format!(
                "speed must be non-negative, got {}",
                self.speed_kmh
            )));
        }
        if !(self.h_uav > 0.0) {
            return Err(invalid(format!(
                "UAV height must be positive, got {}",
                self.h_uav
            )));
        }
        if !(self.duration_s > 0.0) {
            return Err(invalid(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.sample_period_ms > 0.0) {
            return Err(invalid(format!(
                "measurement gap must be positive, got {}",
                self.sample_period_ms
            )));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        sample_count(self.duration_s, self.sample_period_ms)
    }

    /// Covered distance (km).
    pub fn distance_km(&self) -> f64 {
        self.speed_kmh * self.duration_s / 3600.0
    }

    pub fn position_at(&self, t_s: f64) -> Point2 {
        let s = self.speed_kmh * t_s / 3600.0;
        self.start
            .offset(s * self.heading.cos(), s * self.heading.sin())
    }

    pub fn positions(&self) -> Vec<Point2> {
        (0..self.num_samples())
            .map(|i| self.position_at(i as f64 * self.sample_period_ms / 1000.0))
            .collect()
    }

    pub fn end(&self) -> Point2 {
        self.position_at(self.duration_s)
    }
}

/// Piecewise-constant speed schedule: `(start time s, speed km/h)` breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    breakpoints: Vec<(f64, f64)>,
    total_s: f64,
}

impl SpeedProfile {
    /// The first breakpoint must start at t = 0; the profile ends at `total_s`.
    pub fn new(breakpoints: Vec<(f64, f64)>, total_s: f64) -> Result<Self> {
        match breakpoints.first() {
            Some(&(t0, _)) if t0 == 0.0 => {}
            _ => return Err(invalid("speed profile must start at t = 0")),
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(invalid("speed profile times must be strictly increasing"));
            }
        }
        if breakpoints.iter().any(|&(_, v)| !(v >= 0.0 && v.is_finite())) {
            return Err(invalid("speeds must be non-negative"));
        }
        let last_t = breakpoints.last().map(|b| b.0).unwrap_or(0.0);
        if !(total_s > 0.0 && total_s >= last_t) {
            return Err(invalid(format!(
                "profile duration {total_s} must cover the last breakpoint {last_t}"
            )));
        }
        Ok(Self {
            breakpoints,
            total_s,
        })
    }

    pub fn total_s(&self) -> f64 {
        self.total_s
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn speed_at(&self, t_s: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&(t, _)| t <= t_s);
        self.breakpoints[idx.saturating_sub(1)].1
    }

    /// Along-track distance flown by time `t_s` (km).
    pub fn distance_at(&self, t_s: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &(t0, v)) in self.breakpoints.iter().enumerate() {
            if t0 >= t_s {
                break;
            }
            let t1 = self
                .breakpoints
                .get(i + 1)
                .map_or(f64::INFINITY, |b| b.0)
                .min(t_s);
            acc += v * (t1 - t0) / 3600.0;
        }
        acc
    }

    pub fn positions(&self, start: Point2, heading: f64, period_ms: f64) -> Vec<Point2> {
        (0..sample_count(self.total_s, period_ms))
            .map(|i| {
                let s = self.distance_at(i as f64 * period_ms / 1000.0);
                start.offset(s * heading.cos(), s * heading.sin())
            })
            .collect()
    }
}

/// Direct and ground-reflected path geometry between one GBS and the UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// km
    pub horiz_dist: f64,
    /// Direct 3D distance (m).
    pub l: f64,
    /// Elevation of the UAV seen from the GBS, positive upward (deg).
    pub theta: f64,
    /// GBS to reflection point (m).
    pub r1: f64,
    /// Reflection point to UAV (m).
    pub r2: f64,
    /// Grazing angle at the reflection point (deg).
    pub psi: f64,
}

/// Flat-earth image-method geometry; the reflected path is the straight line
/// from the GBS image at depth `h_gbs` to the UAV.
pub fn link_geometry(gbs: Point2, uav: Point2, h_gbs: f64, h_uav: f64) -> Result<LinkGeometry> {
    if !(h_gbs > 0.0 && h_uav > 0.0) {
        return Err(Error::Domain(format!(
            "heights must be positive (h_gbs={h_gbs}, h_uav={h_uav})"
        )));
    }
    Ok(link_geometry_unchecked(gbs.distance(&uav), h_gbs, h_uav))
}

pub(crate) fn link_geometry_unchecked(horiz_km: f64, h_gbs: f64, h_uav: f64) -> LinkGeometry {
    let horiz_m = horiz_km * 1000.0;
    let dh = h_uav - h_gbs;
    let hs = h_uav + h_gbs;
    let l = horiz_m.hypot(dh);
    let unfolded = horiz_m.hypot(hs);
    let (theta, psi) = if horiz_m == 0.0 {
        (if dh < 0.0 { -90.0 } else { 90.0 }, 90.0)
    } else {
        (dh.atan2(horiz_m).to_degrees(), hs.atan2(horiz_m).to_degrees())
    };
    LinkGeometry {
        horiz_dist: horiz_km,
        l,
        theta,
        r1: unfolded * h_gbs / hs,
        r2: unfolded * h_uav / hs,
        psi,
    }
}
