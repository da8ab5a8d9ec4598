use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::slope_from_attitude;

/// A local plane: center, attitude, and per-component variances.
///
/// The same type carries the canopy fit, the trajectory prediction, the
/// exteroceptive prediction and the fused support plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlaneEstimate {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub var_z: f64,
    pub var_roll: f64,
    pub var_pitch: f64,
}

impl PlaneEstimate {
    pub fn xy(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn slope(&self) -> f64 {
        slope_from_attitude(self.roll, self.pitch)
    }

    /// `(value, variance)` for z, roll and pitch, in that order.
    pub fn channels(&self) -> [(f64, f64); 3] {
        [(self.z, self.var_z), (self.roll, self.var_roll), (self.pitch, self.var_pitch)]
    }

    pub fn with_channels(x: f64, y: f64, ch: [(f64, f64); 3]) -> Self {
        Self { x, y, z: ch[0].0, var_z: ch[0].1, roll: ch[1].0, var_roll: ch[1].1, pitch: ch[2].0, var_pitch: ch[2].1 }
    }
}
