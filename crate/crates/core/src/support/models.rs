//! Trajectory-trained regressors: the trivariate plane model and the
//! univariate vegetation-depth model.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::surf::{fit_surf_plane, SurfFitConfig};
use super::SupportError;
use crate::geom::{PlaneEstimate, PointCloudIndex, TrajectoryHistory};
use crate::mvgpr::{FitMask, Hyperparams, KernelParams, MvgprModel, OutputCovParams, TrainingSet};

const VAR_FLOOR: f64 = 1e-6;

/// Hyperparameter search settings shared by both regressors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpFitConfig {
    /// Run the likelihood search; otherwise use the initial values as is.
    pub fit: bool,
    pub budget: usize,
    /// Initial squared length scale (m^2).
    pub init_l2: f64,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        Self { fit: true, budget: 100, init_l2: 1.0 }
    }
}

impl GpFitConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.init_l2 > 0.0) || (self.fit && self.budget == 0) {
            return Err(format!("invalid GP fit config: {self:?}"));
        }
        Ok(())
    }
}

fn sample_var(v: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = v.len() as f64;
    let mean = v.clone().sum::<f64>() / n;
    v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
}

fn xy_matrix(pts: &[Vector2<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(pts.len(), 2, |i, j| pts[i][j])
}

fn build(train: TrainingSet, init: Hyperparams, mask: FitMask, gp: &GpFitConfig) -> Result<MvgprModel, SupportError> {
    if gp.fit {
        Ok(MvgprModel::fit(train, &init, gp.budget, mask, true)?.0)
    } else {
        Ok(MvgprModel::new(train, init, true)?)
    }
}

/// Fits the (z, roll, pitch) regressor on the trajectory history.
///
/// The observation noise is the history's odometry variance and stays fixed;
/// the signal variance, length scale and output covariance are fitted.
pub fn fit_proprio_model(history: &TrajectoryHistory, gp: &GpFitConfig) -> Result<MvgprModel, SupportError> {
    if history.len() < 2 {
        return Err(SupportError::InsufficientHistory { found: history.len(), needed: 2 });
    }
    let att = history.attitudes();
    let y = DMatrix::from_fn(att.len(), 3, |i, j| att[i][j]);
    let train = TrainingSet::new(xy_matrix(&history.positions_xy()), y)?;
    let vars: Vec<f64> = (0..3).map(|j| sample_var(att.iter().map(|a| a[j])).max(VAR_FLOOR)).collect();
    let init = Hyperparams {
        kernel: KernelParams { sf2: vars[0], l2: gp.init_l2, sigma_n2: history.sigma_n_pro() },
        output: OutputCovParams {
            psi: vec![0.0, 0.5 * (vars[1] / vars[0]).ln(), 0.5 * (vars[2] / vars[0]).ln()],
            phi: vec![0.0; 3],
        },
    };
    let mask = FitMask { sigma_n2: false, ..FitMask::ALL };
    build(train, init, mask, gp)
}

/// Trajectory-based plane at `q`: predictive mean and marginal variances.
pub fn proprioception(model: &MvgprModel, q: &Vector2<f64>) -> Result<PlaneEstimate, SupportError> {
    let (m, v) = model.predict_point(q.x, q.y)?;
    Ok(PlaneEstimate::with_channels(q.x, q.y, [(m[0], v[0]), (m[1], v[1]), (m[2], v[2])]))
}

/// Fits the vegetation-depth regressor.
///
/// At each history sample the depth is the canopy-plane height minus the
/// recorded height; its variance (odometry plus canopy-fit variance) enters
/// the regression as per-sample noise.
pub fn fit_depth_model(
    cloud: &PointCloudIndex,
    history: &TrajectoryHistory,
    surf: &SurfFitConfig,
    gp: &GpFitConfig,
) -> Result<MvgprModel, SupportError> {
    let mut xs = Vec::new();
    let mut depth = Vec::new();
    let mut noise = Vec::new();
    for s in history.samples() {
        let q = s.position.xy();
        if let Ok(fit) = fit_surf_plane(cloud, &q, surf) {
            xs.push(q);
            depth.push(fit.plane.z - s.position.z);
            noise.push(history.sigma_n_pro() + fit.plane.var_z);
        }
    }
    if xs.len() < 2 {
        return Err(SupportError::DepthModelUnavailable);
    }
    let init = Hyperparams {
        kernel: KernelParams { sf2: sample_var(depth.iter().copied()).max(VAR_FLOOR), l2: gp.init_l2, sigma_n2: 0.0 },
        output: OutputCovParams::identity(1),
    };
    let n = xs.len();
    let train = TrainingSet::with_noise(xy_matrix(&xs), DMatrix::from_vec(n, 1, depth), DVector::from_vec(noise))?;
    build(train, init, FitMask::KERNEL_ONLY, gp)
}

/// Exteroceptive plane: the canopy plane lowered by the predicted depth,
/// with the canopy attitude.
pub fn ex_perception(
    depth: &MvgprModel,
    surf: &PlaneEstimate,
    q: &Vector2<f64>,
) -> Result<PlaneEstimate, SupportError> {
    let (h, var_h) = depth.predict_point(q.x, q.y)?;
    Ok(PlaneEstimate { x: q.x, y: q.y, z: surf.z - h[0], var_z: var_h[0] + surf.var_z, ..*surf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{HistoryConfig, RobotPoseSample, RotationMatrix};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn straight_history(z: impl Fn(f64) -> f64, n: usize) -> TrajectoryHistory {
        let mut h = TrajectoryHistory::new(HistoryConfig { capacity: n, ..Default::default() });
        for i in 0..n {
            let x = 0.2 * i as f64;
            let pose =
                RobotPoseSample { time: x, position: Vector3::new(x, 0.0, z(x)), rotation: RotationMatrix::identity() };
            h.push(pose).unwrap();
        }
        h
    }

    #[test]
    fn needs_two_samples() {
        let h = straight_history(|_| 0.0, 1);
        assert!(matches!(
            fit_proprio_model(&h, &GpFitConfig::default()),
            Err(SupportError::InsufficientHistory { found: 1, .. })
        ));
    }

    #[test]
    fn depth_model_needs_cloud_support() {
        let h = straight_history(|_| 0.0, 10);
        let cloud = PointCloudIndex::new(Vec::new());
        let r = fit_depth_model(&cloud, &h, &SurfFitConfig::default(), &GpFitConfig::default());
        assert!(matches!(r, Err(SupportError::DepthModelUnavailable)));
    }

    #[test]
    fn ep_plane_copies_canopy_attitude() {
        let h = straight_history(|_| 0.0, 10);
        let mut pts = Vec::new();
        for i in 0..400 {
            for j in 0..20 {
                pts.push(Vector3::new(-0.2 + 0.006 * i as f64, -0.1 + 0.01 * j as f64, 0.15));
            }
        }
        let cloud = PointCloudIndex::new(pts);
        let depth = fit_depth_model(&cloud, &h, &SurfFitConfig::default(), &GpFitConfig::default()).unwrap();
        let surf = PlaneEstimate {
            x: 1.0,
            z: 0.15,
            roll: 0.1,
            pitch: -0.2,
            var_roll: 0.3,
            var_pitch: 0.4,
            ..Default::default()
        };
        let ep = ex_perception(&depth, &surf, &Vector2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(ep.z, 0.0, epsilon = 1e-3);
        assert_eq!((ep.roll, ep.pitch, ep.var_roll, ep.var_pitch), (0.1, -0.2, 0.3, 0.4));
    }
}
