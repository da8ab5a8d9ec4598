use std::collections::VecDeque;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{extract_pitch, extract_roll, GeomError, RotationMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotPoseSample {
    pub time: f64,
    pub position: Vector3<f64>,
    pub rotation: RotationMatrix,
}

/// Limits on the proprioceptive training window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistoryConfig {
    /// Maximum number of retained samples.
    pub capacity: usize,
    /// Minimum horizontal spacing between consecutive retained samples (m).
    pub min_stride: f64,
    /// Constant odometry height-noise variance (m^2).
    pub sigma_n_pro: f64,
}

impl Default for HistoryConfig {
    fn default() -> Self {
        Self { capacity: 50, min_stride: 0.05, sigma_n_pro: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Accepted,
    /// Closer than `min_stride` to the previous retained sample.
    TooClose,
    /// Pitch at gimbal lock.
    GimbalLock,
}

/// The most recent proprioceptive samples (the previous trajectory).
#[derive(Debug, Clone)]
pub struct TrajectoryHistory {
    cfg: HistoryConfig,
    samples: VecDeque<RobotPoseSample>,
    last_time: Option<f64>,
}

impl TrajectoryHistory {
    pub fn new(cfg: HistoryConfig) -> Self {
        Self { cfg, samples: VecDeque::with_capacity(cfg.capacity), last_time: None }
    }

    pub fn config(&self) -> &HistoryConfig {
        &self.cfg
    }

    pub fn sigma_n_pro(&self) -> f64 {
        self.cfg.sigma_n_pro
    }

    /// Appends a sample, evicting the oldest one past capacity.
    ///
    /// Decimated or gimbal-locked samples are dropped without error; time must
    /// still increase across every offered sample.
    pub fn push(&mut self, s: RobotPoseSample) -> Result<PushOutcome, GeomError> {
        if self.last_time.is_some_and(|t| s.time <= t) || !s.time.is_finite() {
            return Err(GeomError::NonIncreasingTime);
        }
        self.last_time = Some(s.time);
        if extract_roll(&s.rotation).is_err() {
            return Ok(PushOutcome::GimbalLock);
        }
        if let Some(last) = self.samples.back() {
            if (last.position.xy() - s.position.xy()).norm() < self.cfg.min_stride {
                return Ok(PushOutcome::TooClose);
            }
        }
        if self.cfg.capacity == 0 {
            return Ok(PushOutcome::Accepted);
        }
        if self.samples.len() == self.cfg.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(s);
        Ok(PushOutcome::Accepted)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &RobotPoseSample> {
        self.samples.iter()
    }

    pub fn last(&self) -> Option<&RobotPoseSample> {
        self.samples.back()
    }

    pub fn positions_xy(&self) -> Vec<Vector2<f64>> {
        self.samples.iter().map(|s| s.position.xy()).collect()
    }

    /// `(z, roll, pitch)` per retained sample.
    pub fn attitudes(&self) -> Vec<[f64; 3]> {
        self.samples
            .iter()
            .map(|s| {
                let roll = extract_roll(&s.rotation).expect("gimbal-locked samples are never retained");
                [s.position.z, roll, extract_pitch(&s.rotation)]
            })
            .collect()
    }
}
