//! Canopy plane fitting on the point cloud around a query.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SupportError;
use crate::geom::{attitude_from_normal, PlaneEstimate, PointCloudIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfFitConfig {
    /// Horizontal radius of the fitted patch (m).
    pub radius: f64,
    pub ransac_iters: usize,
    /// Point-to-plane distance under which a point is an inlier (m).
    pub inlier_threshold: f64,
    pub min_points: usize,
    pub kappa_r: f64,
    pub kappa_p: f64,
    /// Base seed; each query mixes in its own coordinates.
    pub seed: u64,
}

impl Default for SurfFitConfig {
    fn default() -> Self {
        Self {
            radius: 0.15,
            ransac_iters: 100,
            inlier_threshold: 0.03,
            min_points: 8,
            kappa_r: 1.0,
            kappa_p: 1.0,
            seed: 0,
        }
    }
}

impl SurfFitConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.radius > 0.0) || self.min_points < 3 || !(self.kappa_r > 0.0) || !(self.kappa_p > 0.0) {
            return Err(format!("invalid surface-fit config: {self:?}"));
        }
        if self.ransac_iters == 0 || !(self.inlier_threshold > 0.0) {
            return Err("RANSAC needs iterations and a positive inlier threshold".into());
        }
        Ok(())
    }
}

/// A fitted canopy plane plus the point sets behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfFit {
    pub plane: PlaneEstimate,
    pub inliers: usize,
    pub enveloped: usize,
}

/// Mixes query coordinates into the seed so each query is reproducible on
/// its own, independent of call order.
fn query_seed(base: u64, q: &Vector2<f64>) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for v in [q.x.to_bits(), q.y.to_bits()] {
        h ^= v;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// `z = c + a (x - qx) + b (y - qy)` through the given points, as `(a, b, c)`.
pub(crate) fn least_squares_plane(points: &[&Vector3<f64>], q: &Vector2<f64>) -> Option<Vector3<f64>> {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in points {
        let row = Vector3::new(p.x - q.x, p.y - q.y, 1.0);
        ata += row * row.transpose();
        atb += row * p.z;
    }
    let sol = ata.lu().solve(&atb)?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Fits the canopy plane at `q` with RANSAC, refined by least squares on the
/// consensus set.
///
/// Attitude variances scale the squared normal residuals of the inliers by
/// `kappa`; the height variance is the spread of all enveloped heights around
/// the plane-center height.
pub fn fit_surf_plane(cloud: &PointCloudIndex, q: &Vector2<f64>, cfg: &SurfFitConfig) -> Result<SurfFit, SupportError> {
    let pts = cloud.radius_query(q, cfg.radius);
    if pts.len() < cfg.min_points {
        return Err(SupportError::InsufficientPoints { found: pts.len(), needed: cfg.min_points });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(query_seed(cfg.seed, q));

    let mut best: Option<(usize, Vector3<f64>, Vector3<f64>)> = None; // (count, unit normal, point)
    for _ in 0..cfg.ransac_iters {
        let idx = sample(&mut rng, pts.len(), 3);
        let (a, b, c) = (pts[idx.index(0)], pts[idx.index(1)], pts[idx.index(2)]);
        let n = (b - a).cross(&(c - a));
        let norm = n.norm();
        if norm < 1e-12 {
            continue;
        }
        let mut n = n / norm;
        if n.z < 0.0 {
            n = -n;
        }
        // Near-vertical planes cannot be written as a height field.
        if n.z < 0.1 {
            continue;
        }
        let count = pts.iter().filter(|p| n.dot(&(*p - a)).abs() < cfg.inlier_threshold).count();
        if best.as_ref().is_none_or(|(bc, _, _)| count > *bc) {
            best = Some((count, n, a));
        }
    }
    let Some((_, n0, p0)) = best else {
        return Err(SupportError::InsufficientPoints { found: 0, needed: 3 });
    };
    let inliers: Vec<&Vector3<f64>> = pts.iter().filter(|p| n0.dot(&(*p - p0)).abs() < cfg.inlier_threshold).collect();

    let (normal, z_center) = match least_squares_plane(&inliers, q) {
        Some(s) if inliers.len() >= 3 => (Vector3::new(-s.x, -s.y, 1.0).normalize(), s.z),
        _ => {
            // Degenerate consensus geometry: keep the minimal-sample plane.
            let z = p0.z - (n0.x * (q.x - p0.x) + n0.y * (q.y - p0.y)) / n0.z;
            (n0, z)
        }
    };
    let (roll, pitch) = attitude_from_normal(&normal);
    let center = Vector3::new(q.x, q.y, z_center);

    let k = inliers.len();
    let normal_ss: f64 = inliers.iter().map(|p| normal.dot(&(*p - center)).powi(2)).sum();
    let att_var = if k > 1 { normal_ss / (k - 1) as f64 } else { 0.0 };
    let height_ss: f64 = pts.iter().map(|p| (p.z - z_center).powi(2)).sum();
    let var_z = height_ss / (pts.len() - 1) as f64;

    Ok(SurfFit {
        plane: PlaneEstimate {
            x: q.x,
            y: q.y,
            z: z_center,
            roll,
            pitch,
            var_z,
            var_roll: cfg.kappa_r * att_var,
            var_pitch: cfg.kappa_p * att_var,
        },
        inliers: k,
        enveloped: pts.len(),
    })
}
