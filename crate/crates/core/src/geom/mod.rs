//! Geometric primitives shared by the estimators and the planner.

mod attitude;
mod index;
mod plane;
mod segment;
mod trajectory;

pub use attitude::{
    attitude_from_normal, extract_pitch, extract_roll, normal_from_attitude, rot_x, rot_y, rot_z, slope_from_attitude,
    RotationMatrix, GIMBAL_LOCK_TOL,
};
pub use index::{Grid2, PointCloudIndex};
pub use plane::PlaneEstimate;
pub use segment::point_segment_distance;
pub use trajectory::{HistoryConfig, PushOutcome, RobotPoseSample, TrajectoryHistory};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeomError {
    #[error("matrix is not a proper rotation")]
    NotOrthonormal,
    #[error("pitch at gimbal lock; roll is undefined")]
    GimbalLock,
    #[error("trajectory sample time does not increase")]
    NonIncreasingTime,
}
