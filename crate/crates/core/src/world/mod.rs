//! Synthetic vegetated worlds with analytic ground truth, and the sensor
//! models that observe them.

mod sensors;
mod spec;

pub use sensors::{sample_cloud, simulate_traverse};
pub use spec::{parse_world_spec, WorldSpec};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{attitude_from_normal, PlaneEstimate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("({0}, {1}) lies outside the world bounds")]
    OutOfBounds(f64, f64),
    #[error("invalid world: {0}")]
    Invalid(String),
}

/// Axis-aligned rectangle in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn contains_bounds(&self, other: &Bounds) -> bool {
        self.contains(other.min[0], other.min[1]) && self.contains(other.max[0], other.max[1])
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    fn is_valid(&self) -> bool {
        self.min.iter().chain(&self.max).all(|v| v.is_finite()) && self.width() > 0.0 && self.height() > 0.0
    }
}

/// Isotropic Gaussian bump `amplitude * exp(-|p - center|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub sigma: f64,
}

impl Bump {
    fn value(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        self.amplitude * (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn gradient(&self, x: f64, y: f64) -> Vector2<f64> {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let s2 = self.sigma * self.sigma;
        -self.value(x, y) / s2 * Vector2::new(dx, dy)
    }
}

/// Rigid ground `offset + ramp . (x, y) + sum(bumps)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportSurface {
    pub offset: f64,
    pub ramp: [f64; 2],
    pub bumps: Vec<Bump>,
}

/// Vegetation height `max(0, base + gradient . (x, y) + sum(bumps))`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VegetationField {
    pub base: f64,
    pub gradient: [f64; 2],
    pub bumps: Vec<Bump>,
}

/// Rigid vertical cylinder standing on the ground (a tree or rock).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

impl Obstacle {
    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.center[0], self.center[1])
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (Vector2::new(x, y) - self.center()).norm() <= self.radius
    }
}

/// Per-sensor noise levels for the simulated cloud and odometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoise {
    /// Vertical noise per cloud point (m).
    pub cloud_sigma: f64,
    /// Extra vertical scatter of returns from vegetation (m); rigid obstacle
    /// tops and bare ground only see `cloud_sigma`.
    pub canopy_roughness: f64,
    pub odom_pos_sigma: f64,
    pub odom_att_sigma: f64,
    /// Cloud points per square metre.
    pub density: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self { cloud_sigma: 0.02, canopy_roughness: 0.0, odom_pos_sigma: 0.0, odom_att_sigma: 0.0, density: 1000.0 }
    }
}

impl SensorNoise {
    pub fn validate(&self) -> Result<(), WorldError> {
        let vals = [self.cloud_sigma, self.canopy_roughness, self.odom_pos_sigma, self.odom_att_sigma, self.density];
        if vals.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(WorldError::Invalid(format!("noise levels must be finite and non-negative: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldModel {
    pub bounds: Bounds,
    #[serde(default)]
    pub support: SupportSurface,
    #[serde(default)]
    pub vegetation: VegetationField,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl WorldModel {
    pub fn flat(bounds: Bounds) -> Self {
        Self {
            bounds,
            support: SupportSurface::default(),
            vegetation: VegetationField::default(),
            obstacles: Vec::new(),
        }
    }

    /// Checks well-formedness; with `h_crit`, also that every obstacle is tall
    /// enough to be detected by the vegetation-height criterion.
    pub fn validate(&self, h_crit: Option<f64>) -> Result<(), WorldError> {
        if !self.bounds.is_valid() {
            return Err(WorldError::Invalid("bounds must be finite with max > min".into()));
        }
        let bumps = self.support.bumps.iter().chain(&self.vegetation.bumps);
        if bumps.clone().any(|b| !(b.sigma > 0.0) || !b.amplitude.is_finite()) {
            return Err(WorldError::Invalid("bump sigma must be positive".into()));
        }
        for o in &self.obstacles {
            if !(o.radius > 0.0) || !(o.height > 0.0) {
                return Err(WorldError::Invalid("obstacles need positive radius and height".into()));
            }
            if let Some(h) = h_crit {
                if o.height <= h {
                    return Err(WorldError::Invalid(format!(
                        "obstacle at {:?} is {} m tall, not above h_crit = {h}",
                        o.center, o.height
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ground height `g(x, y)`.
    pub fn ground(&self, x: f64, y: f64) -> f64 {
        let s = &self.support;
        s.offset + s.ramp[0] * x + s.ramp[1] * y + s.bumps.iter().map(|b| b.value(x, y)).sum::<f64>()
    }

    pub fn ground_gradient(&self, x: f64, y: f64) -> Vector2<f64> {
        let s = &self.support;
        Vector2::new(s.ramp[0], s.ramp[1]) + s.bumps.iter().map(|b| b.gradient(x, y)).sum::<Vector2<f64>>()
    }

    /// True vegetation height `h_true(x, y) >= 0`.
    pub fn vegetation(&self, x: f64, y: f64) -> f64 {
        let v = &self.vegetation;
        let h = v.base + v.gradient[0] * x + v.gradient[1] * y + v.bumps.iter().map(|b| b.value(x, y)).sum::<f64>();
        h.max(0.0)
    }

    /// Tallest obstacle covering `(x, y)`.
    pub fn obstacle_at(&self, x: f64, y: f64) -> Option<&Obstacle> {
        self.obstacles.iter().filter(|o| o.contains(x, y)).max_by(|a, b| a.height.total_cmp(&b.height))
    }

    /// Height of the first return seen from above: obstacle top or canopy top.
    pub fn canopy(&self, x: f64, y: f64) -> f64 {
        let top = match self.obstacle_at(x, y) {
            Some(o) => o.height,
            None => self.vegetation(x, y),
        };
        self.ground(x, y) + top
    }

    /// Exact support plane at `(x, y)` with zero variances.
    pub fn ground_truth_plane(&self, x: f64, y: f64) -> Result<PlaneEstimate, WorldError> {
        if !self.bounds.contains(x, y) {
            return Err(WorldError::OutOfBounds(x, y));
        }
        let g = self.ground_gradient(x, y);
        let (roll, pitch) = attitude_from_normal(&Vector3::new(-g.x, -g.y, 1.0));
        Ok(PlaneEstimate { x, y, z: self.ground(x, y), roll, pitch, ..Default::default() })
    }

    /// Horizontal distance from `p` to the nearest obstacle boundary (0 inside).
    pub fn clearance(&self, p: &Vector2<f64>) -> f64 {
        self.obstacles.iter().map(|o| ((p - o.center()).norm() - o.radius).max(0.0)).fold(f64::INFINITY, f64::min)
    }

    /// Minimum clearance along the segment `a -> b`.
    pub fn segment_clearance(&self, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
        self.obstacles
            .iter()
            .map(|o| (crate::geom::point_segment_distance(&o.center(), a, b) - o.radius).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }
}
