//! Per-query support-plane estimation: canopy fit, trajectory regression,
//! vegetation-depth correction, fusion and traversability.

mod fusion;
mod models;
mod surf;

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fusion::{fuse, fusion_weight, traversability, TraversabilityConfig, TAU_MAX};
pub use models::{ex_perception, fit_depth_model, fit_proprio_model, proprioception, GpFitConfig};
pub use surf::{fit_surf_plane, SurfFit, SurfFitConfig};

use crate::geom::{PlaneEstimate, PointCloudIndex, TrajectoryHistory};
use crate::mvgpr::{GpError, MvgprModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SupportError {
    #[error("plane fit needs {needed} points, found {found}")]
    InsufficientPoints { found: usize, needed: usize },
    #[error("trajectory history has {found} samples, need {needed}")]
    InsufficientHistory { found: usize, needed: usize },
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("vegetation-depth model unavailable: too few canopy fits along the trajectory")]
    DepthModelUnavailable,
    #[error("both estimates claim zero variance but disagree")]
    DegenerateVariance,
    #[error("invalid estimation config: {0}")]
    Config(String),
}

/// Which sources feed the support plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    /// Trajectory regression fused with the depth-corrected canopy.
    Fused,
    /// The canopy plane is taken as the support plane.
    SurfOnly,
    /// Trajectory regression only; the point cloud is ignored.
    ProOnly,
}

impl EstimationMode {
    pub const ALL: [EstimationMode; 3] = [EstimationMode::Fused, EstimationMode::SurfOnly, EstimationMode::ProOnly];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimationMode::Fused => "fused",
            EstimationMode::SurfOnly => "surf_only",
            EstimationMode::ProOnly => "pro_only",
        }
    }
}

impl fmt::Display for EstimationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?} (expected fused, surf_only or pro_only)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub surf: SurfFitConfig,
    pub traversability: TraversabilityConfig,
    pub gp: GpFitConfig,
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<(), SupportError> {
        self.surf.validate().and(self.traversability.validate()).and(self.gp.validate()).map_err(SupportError::Config)
    }
}

/// Result of one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportEstimate {
    pub s_plane: PlaneEstimate,
    pub surf_plane: PlaneEstimate,
    pub pro_plane: Option<PlaneEstimate>,
    pub ep_plane: Option<PlaneEstimate>,
    /// `surf_plane.z - s_plane.z`.
    pub veg_height: f64,
    pub tau: f64,
    pub is_obstacle: bool,
}

impl SupportEstimate {
    /// Fusion weight on the trajectory height, when both sources exist.
    pub fn w_z(&self) -> Option<f64> {
        Some(fusion_weight(self.pro_plane?.var_z, self.ep_plane?.var_z))
    }
}

/// Models fitted once per history snapshot.
#[derive(Debug, Clone)]
pub struct SupportModels {
    pub proprio: Option<MvgprModel>,
    pub depth: Option<MvgprModel>,
}

impl SupportModels {
    /// Fits what `mode` needs. A missing depth model is not an error: the
    /// fused mode then falls back to the trajectory plane.
    pub fn fit(
        mode: EstimationMode,
        cloud: &PointCloudIndex,
        history: &TrajectoryHistory,
        cfg: &EstimationConfig,
    ) -> Result<Self, SupportError> {
        cfg.validate()?;
        let proprio = match mode {
            EstimationMode::SurfOnly => None,
            _ => Some(fit_proprio_model(history, &cfg.gp)?),
        };
        let depth = match mode {
            EstimationMode::Fused => match fit_depth_model(cloud, history, &cfg.surf, &cfg.gp) {
                Ok(m) => Some(m),
                Err(SupportError::DepthModelUnavailable) => None,
                Err(e) => return Err(e),
            },
            _ => None,
        };
        Ok(Self { proprio, depth })
    }
}

/// Estimates the support plane at `q`.
///
/// In fused mode a node is an obstacle when the canopy stands more than
/// `h_crit` above the support plane. The canopy-only mode cannot see
/// vegetation, so it flags nodes whose unclamped score reaches 1 instead;
/// the trajectory-only mode never flags anything.
pub fn estimate_support(
    q: &Vector2<f64>,
    cloud: &PointCloudIndex,
    models: &SupportModels,
    mode: EstimationMode,
    cfg: &EstimationConfig,
) -> Result<SupportEstimate, SupportError> {
    let trav = &cfg.traversability;
    let proprio = || {
        models
            .proprio
            .as_ref()
            .ok_or(SupportError::InsufficientHistory { found: 0, needed: 2 })
            .and_then(|m| proprioception(m, q))
    };
    let (s_plane, surf_plane, pro_plane, ep_plane) = match mode {
        EstimationMode::ProOnly => {
            let pro = proprio()?;
            (pro, pro, Some(pro), None)
        }
        EstimationMode::SurfOnly => {
            let surf = fit_surf_plane(cloud, q, &cfg.surf)?.plane;
            (surf, surf, None, None)
        }
        EstimationMode::Fused => {
            let surf = fit_surf_plane(cloud, q, &cfg.surf)?.plane;
            let pro = proprio()?;
            match &models.depth {
                Some(depth) => {
                    let ep = ex_perception(depth, &surf, q)?;
                    (fuse(&pro, &ep)?, surf, Some(pro), Some(ep))
                }
                None => (pro, surf, Some(pro), None),
            }
        }
    };
    let veg_height = surf_plane.z - s_plane.z;
    let mut est =
        SupportEstimate { s_plane, surf_plane, pro_plane, ep_plane, veg_height, tau: 0.0, is_obstacle: false };
    est.tau = traversability(&est, trav);
    est.is_obstacle = match mode {
        EstimationMode::Fused => veg_height > trav.h_crit,
        EstimationMode::SurfOnly => trav.raw_score(s_plane.slope(), trav.uncertainty(&s_plane), veg_height) >= 1.0,
        EstimationMode::ProOnly => false,
    };
    Ok(est)
}

/// Estimation context bound to one cloud and one set of fitted models.
#[derive(Debug, Clone)]
pub struct SupportEstimator<'a> {
    pub cloud: &'a PointCloudIndex,
    pub models: SupportModels,
    pub mode: EstimationMode,
    pub cfg: EstimationConfig,
}

impl<'a> SupportEstimator<'a> {
    pub fn build(
        mode: EstimationMode,
        cloud: &'a PointCloudIndex,
        history: &TrajectoryHistory,
        cfg: EstimationConfig,
    ) -> Result<Self, SupportError> {
        let models = SupportModels::fit(mode, cloud, history, &cfg)?;
        Ok(Self { cloud, models, mode, cfg })
    }

    pub fn estimate(&self, q: &Vector2<f64>) -> Result<SupportEstimate, SupportError> {
        estimate_support(q, self.cloud, &self.models, self.mode, &self.cfg)
    }

    pub fn h_crit(&self) -> f64 {
        self.cfg.traversability.h_crit
    }
}
