//! Roll/pitch extraction from body rotation matrices.
//!
//! Rotations are composed in ZYX order with the sign convention under which
//! `extract_pitch`/`extract_roll` are exact inverses:
//! `R = Rz(yaw) * Ry(-pitch) * Rx(-roll)`. The third row of `R` does not
//! depend on yaw, so the extracted attitude is heading-free.

use nalgebra::{Matrix3, Vector3};

use super::GeomError;

/// `|cos(pitch)|` at or below this value is treated as gimbal lock.
pub const GIMBAL_LOCK_TOL: f64 = 1e-8;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// A proper rotation (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeomError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(GeomError::NotOrthonormal);
        }
        let err = (m.transpose() * m - Matrix3::identity()).amax();
        let det = m.determinant();
        if err > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeomError::NotOrthonormal);
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Composes `Rz(yaw) * Ry(-pitch) * Rx(-roll)`.
    pub fn from_attitude(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self(rot_z(yaw) * rot_y(-pitch) * rot_x(-roll))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Row-major entries, `r00 r01 ... r22`.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
    }
}

/// Standard right-handed rotation about x.
pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Standard right-handed rotation about y.
pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Standard right-handed rotation about z.
pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `atan2(R31, sqrt(R32^2 + R33^2))`.
pub fn extract_pitch(r: &RotationMatrix) -> f64 {
    let m = r.matrix();
    m[(2, 0)].atan2(m[(2, 1)].hypot(m[(2, 2)]))
}

/// `atan2(-R32 / cos p, R33 / cos p)` with `p = extract_pitch(r)`.
pub fn extract_roll(r: &RotationMatrix) -> Result<f64, GeomError> {
    let cp = extract_pitch(r).cos();
    if cp.abs() <= GIMBAL_LOCK_TOL {
        return Err(GeomError::GimbalLock);
    }
    let m = r.matrix();
    Ok((-m[(2, 1)] / cp).atan2(m[(2, 2)] / cp))
}

/// Tilt of the plane from horizontal, `arccos(cos(roll) * cos(pitch))`.
pub fn slope_from_attitude(roll: f64, pitch: f64) -> f64 {
    (roll.cos() * pitch.cos()).clamp(-1.0, 1.0).acos()
}

/// Attitude (roll, pitch) of a surface with upward normal `n`, at zero yaw.
///
/// Inverse of [`normal_from_attitude`]; `n` need not be unit length but must
/// have a positive z component.
pub fn attitude_from_normal(n: &Vector3<f64>) -> (f64, f64) {
    let pitch = (-n.x).atan2(n.z);
    let roll = n.y.atan2(n.x.hypot(n.z));
    (roll, pitch)
}

/// Unit surface normal of a zero-yaw body with the given attitude: the body z
/// axis, i.e. the third column of `from_attitude(roll, pitch, 0)`.
pub fn normal_from_attitude(roll: f64, pitch: f64) -> Vector3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vector3::new(-sp * cr, sr, cp * cr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn identity_has_zero_attitude() {
        let r = RotationMatrix::identity();
        assert_eq!(extract_pitch(&r), 0.0);
        assert_eq!(extract_roll(&r).unwrap(), 0.0);
    }

    #[test]
    fn pure_y_rotation_pitch_magnitude() {
        // Brute-force: find the (roll, pitch) grid point whose composition
        // reproduces the standard Ry(0.3), and check the extractor agrees.
        let target = RotationMatrix::new(rot_y(0.3)).unwrap();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -60..=60 {
            for j in -60..=60 {
                let (roll, pitch) = (i as f64 * 0.01, j as f64 * 0.01);
                let cand = RotationMatrix::from_attitude(roll, pitch, 0.0);
                let err = (cand.matrix() - target.matrix()).amax();
                if err < best.0 {
                    best = (err, roll, pitch);
                }
            }
        }
        assert!(best.0 < 1e-12);
        let p = extract_pitch(&target);
        assert_abs_diff_eq!(p.abs(), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p, best.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p, -0.3, epsilon = 1e-12);
    }

    #[test]
    fn roll_from_composed_matrix() {
        for yaw in [-2.5, 0.0, 0.7, 3.0] {
            let r = RotationMatrix::from_attitude(0.2, 0.1, yaw);
            assert_abs_diff_eq!(extract_roll(&r).unwrap(), 0.2, epsilon = 1e-9);
            assert_abs_diff_eq!(extract_pitch(&r), 0.1, epsilon = 1e-9);
        }
    }

    #[test]
    fn gimbal_lock_is_rejected() {
        let r = RotationMatrix::from_attitude(0.0, FRAC_PI_2, 0.0);
        assert_eq!(extract_roll(&r), Err(GeomError::GimbalLock));
    }

    #[test]
    fn slope_examples() {
        assert_eq!(slope_from_attitude(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(slope_from_attitude(0.3, 0.0), 0.3, epsilon = 1e-15);
        let s = slope_from_attitude(0.2, 0.2);
        // Angle between the plane normal and vertical.
        let n = normal_from_attitude(0.2, 0.2);
        let from_normal = n.normalize().dot(&Vector3::z()).acos();
        assert_abs_diff_eq!(s, from_normal, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.281893, epsilon = 1e-6);
    }

    #[test]
    fn rejects_non_rotations() {
        assert!(RotationMatrix::new(Matrix3::identity() * 2.0).is_err());
        let reflect = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(RotationMatrix::new(reflect).is_err());
    }

    proptest! {
        #[test]
        fn attitude_round_trip(roll in -1.2f64..1.2, pitch in -1.2f64..1.2, yaw in -PI..PI) {
            let r = RotationMatrix::from_attitude(roll, pitch, yaw);
            prop_assert!((extract_pitch(&r) - pitch).abs() < 1e-9);
            prop_assert!((extract_roll(&r).unwrap() - roll).abs() < 1e-9);
        }

        #[test]
        fn left_yaw_does_not_change_attitude(roll in -1.2f64..1.2, pitch in -1.2f64..1.2, yaw in -PI..PI, psi in -PI..PI) {
            let r = RotationMatrix::from_attitude(roll, pitch, yaw);
            let turned = RotationMatrix::new(rot_z(psi) * r.matrix()).unwrap();
            prop_assert!((extract_pitch(&r) - extract_pitch(&turned)).abs() < 1e-9);
            prop_assert!((extract_roll(&r).unwrap() - extract_roll(&turned).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn slope_symmetric_and_monotone(a in 0.0f64..1.5, b in 0.0f64..1.5, da in 0.0f64..0.05) {
            prop_assert!((slope_from_attitude(a, b) - slope_from_attitude(b, a)).abs() < 1e-15);
            prop_assert!(slope_from_attitude(a + da, b) >= slope_from_attitude(a, b) - 1e-15);
            prop_assert!(slope_from_attitude(-a, b) == slope_from_attitude(a, b));
        }

        #[test]
        fn normal_attitude_inverse(roll in -1.2f64..1.2, pitch in -1.2f64..1.2) {
            let (r, p) = attitude_from_normal(&normal_from_attitude(roll, pitch));
            prop_assert!((r - roll).abs() < 1e-12 && (p - pitch).abs() < 1e-12);
        }
    }
}
