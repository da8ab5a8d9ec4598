use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Bounds, SensorNoise, WorldError, WorldModel};
use crate::geom::{HistoryConfig, PointCloudIndex, RobotPoseSample, RotationMatrix, TrajectoryHistory};

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("noise levels are validated non-negative")
}

/// Simulated registered map over `region`: one point per cell of a jittered
/// grid with `noise.density` cells per square metre, at the canopy (or
/// obstacle top) plus vertical Gaussian noise. Vegetation returns get the
/// extra `canopy_roughness` scatter.
pub fn sample_cloud(
    world: &WorldModel,
    noise: &SensorNoise,
    region: &Bounds,
    seed: u64,
) -> Result<PointCloudIndex, WorldError> {
    noise.validate()?;
    if !world.bounds.contains_bounds(region) {
        return Err(WorldError::OutOfBounds(region.max[0], region.max[1]));
    }
    if noise.density <= 0.0 {
        return Ok(PointCloudIndex::new(Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dz = normal(noise.cloud_sigma);
    let droughness = normal(noise.canopy_roughness);
    let spacing = noise.density.sqrt().recip();
    let nx = (region.width() / spacing).ceil() as usize;
    let ny = (region.height() / spacing).ceil() as usize;
    let mut points = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = (region.min[0] + (i as f64 + rng.random::<f64>()) * spacing).min(region.max[0]);
            let y = (region.min[1] + (j as f64 + rng.random::<f64>()) * spacing).min(region.max[1]);
            let mut z = world.canopy(x, y) + dz.sample(&mut rng);
            let rough = droughness.sample(&mut rng);
            if world.obstacle_at(x, y).is_none() && world.vegetation(x, y) > 0.0 {
                z += rough;
            }
            points.push(Vector3::new(x, y, z));
        }
    }
    Ok(PointCloudIndex::new(points))
}

/// Drives the robot along `waypoints`, recording a pose every `stride`
/// metres of arc length (time advances at 1 m/s).
///
/// Each pose is the ground-truth support plane at the sample position,
/// perturbed by odometry noise, with yaw set to the travel heading.
pub fn simulate_traverse(
    world: &WorldModel,
    noise: &SensorNoise,
    waypoints: &[[f64; 2]],
    stride: f64,
    seed: u64,
    cfg: HistoryConfig,
) -> Result<TrajectoryHistory, WorldError> {
    noise.validate()?;
    if !(stride > 0.0) {
        return Err(WorldError::Invalid("stride must be positive".into()));
    }
    if waypoints.len() < 2 {
        return Err(WorldError::Invalid("a traverse needs at least two waypoints".into()));
    }
    if let Some(w) = waypoints.iter().find(|w| !world.bounds.contains(w[0], w[1])) {
        return Err(WorldError::OutOfBounds(w[0], w[1]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_noise = normal(noise.odom_pos_sigma);
    let att_noise = normal(noise.odom_att_sigma);
    let mut history = TrajectoryHistory::new(cfg);

    let mut arc = 0.0;
    let mut next = 0.0;
    for seg in waypoints.windows(2) {
        let a = Vector2::new(seg[0][0], seg[0][1]);
        let b = Vector2::new(seg[1][0], seg[1][1]);
        let len = (b - a).norm();
        if len == 0.0 {
            continue;
        }
        let dir = (b - a) / len;
        let yaw = dir.y.atan2(dir.x);
        while next <= arc + len + 1e-12 {
            let p = a + dir * (next - arc);
            let truth = world.ground_truth_plane(p.x, p.y)?;
            let position = Vector3::new(
                p.x + pos_noise.sample(&mut rng),
                p.y + pos_noise.sample(&mut rng),
                truth.z + pos_noise.sample(&mut rng),
            );
            let roll = truth.roll + att_noise.sample(&mut rng);
            let pitch = truth.pitch + att_noise.sample(&mut rng);
            let sample =
                RobotPoseSample { time: next, position, rotation: RotationMatrix::from_attitude(roll, pitch, yaw) };
            history.push(sample).map_err(|e| WorldError::Invalid(e.to_string()))?;
            next += stride;
        }
        arc += len;
    }
    Ok(history)
}
