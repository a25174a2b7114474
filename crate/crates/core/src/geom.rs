//! Rigid-body pose algebra and the rotation statistics shared by the rest of
//! the crate.
//!
//! Rotations are stored as unit quaternions kept in the hemisphere with a
//! non-negative scalar part, so two poses describing the same transform
//! compare equal component-wise.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Pitch within this distance of ±π/2 is treated as gimbal lock.
const GIMBAL_EPS: f64 = 1e-6;

/// Rigid transform: rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    translation: Vector3<f64>,
    rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation: canonical(rotation.into_inner()),
        }
    }

    /// Builds a pose from raw quaternion components in (x, y, z, w) order.
    /// The quaternion is normalized.
    pub fn from_components(t: [f64; 3], q_xyzw: [f64; 4]) -> Self {
        let q = Quaternion::new(q_xyzw[3], q_xyzw[0], q_xyzw[1], q_xyzw[2]);
        Self {
            translation: Vector3::from(t),
            rotation: canonical(q),
        }
    }

    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(t, UnitQuaternion::identity())
    }

    pub fn from_rotation(q: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), q)
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    /// Quaternion components in serialized (x, y, z, w) order.
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    pub fn with_translation(&self, t: Vector3<f64>) -> Self {
        Self {
            translation: t,
            rotation: self.rotation,
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let translation = self.translation + self.rotation * other.translation;
        let q = self.rotation.quaternion() * other.rotation.quaternion();
        Pose {
            translation,
            rotation: canonical(q),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            translation: -(inv * self.translation),
            rotation: canonical(inv.into_inner()),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation.to_rotation_matrix().into_inner());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn euler_angles(&self) -> EulerAngles {
        EulerAngles::from_rotation(&self.rotation)
    }

    /// Angle of the relative rotation between two poses, in radians.
    pub fn angle_to(&self, other: &Pose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn invert(p: &Pose) -> Pose {
    p.inverse()
}

pub fn euler_angles(p: &Pose) -> EulerAngles {
    p.euler_angles()
}

fn canonical(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    let mut q = UnitQuaternion::new_normalize(q).into_inner();
    let flip = if q.w != 0.0 {
        q.w < 0.0
    } else {
        // w == 0: first non-zero vector component decides
        [q.i, q.j, q.k]
            .into_iter()
            .find(|c| *c != 0.0)
            .is_some_and(|c| c < 0.0)
    };
    if flip {
        q = -q;
    }
    UnitQuaternion::new_unchecked(q)
}

/// Intrinsic Z-Y-X (yaw, pitch, roll) angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    /// Decomposes `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
    ///
    /// At gimbal lock (|pitch| within 1e-6 of π/2) roll is set to zero and
    /// the remaining freedom is carried by yaw.
    pub fn from_rotation(q: &UnitQuaternion<f64>) -> Self {
        let r: Matrix3<f64> = q.to_rotation_matrix().into_inner();
        let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        if FRAC_PI_2 - pitch.abs() < GIMBAL_EPS {
            let yaw = (-r[(0, 1)]).atan2(r[(1, 1)]);
            return Self {
                roll: 0.0,
                pitch,
                yaw: wrap_angle(yaw),
            };
        }
        let roll = r[(2, 1)].atan2(r[(2, 2)]);
        let yaw = r[(1, 0)].atan2(r[(0, 0)]);
        Self {
            roll: wrap_angle(roll),
            pitch,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn to_rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), self.pitch)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.roll)
    }

    pub fn to_rotation_matrix(&self) -> Rotation3<f64> {
        self.to_rotation().to_rotation_matrix()
    }
}

/// Maps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Mean of poses: arithmetic mean of translations and the chordal L2 mean of
/// rotations (quaternions sign-aligned to the first one, summed, normalized).
pub fn mean_pose(poses: &[Pose]) -> Result<Pose> {
    let first = poses.first().ok_or(Error::EmptyInput)?;
    if poses.len() == 1 {
        return Ok(*first);
    }
    let reference = first.rotation.into_inner();
    let mut t_sum = Vector3::zeros();
    let mut q_sum = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    for p in poses {
        t_sum += p.translation;
        let q = p.rotation.into_inner();
        q_sum += if q.dot(&reference) < 0.0 { -q } else { q };
    }
    let n = poses.len() as f64;
    Ok(Pose {
        translation: t_sum / n,
        rotation: canonical(q_sum),
    })
}

/// Circular mean of angles in radians, returned in (−π, π].
pub fn circular_mean(angles: &[f64]) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let (s, c) = (s / n, c / n);
    let resultant = s.hypot(c);
    if resultant < 1e-9 {
        return Err(Error::DegenerateMean(resultant));
    }
    Ok(wrap_angle(s.atan2(c)))
}

/// Signed smallest difference `a − b` on the circle, in (−π, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q(axis: Vector3<f64>, angle: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
    }

    #[test]
    fn identity_is_neutral() {
        let p = Pose::new(Vector3::new(1.0, -2.0, 0.5), q(Vector3::new(1.0, 2.0, 3.0), 0.7));
        assert_eq!(compose(&Pose::identity(), &p), p);
    }

    #[test]
    fn inverse_of_pure_translation() {
        let p = Pose::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(invert(&p).translation(), Vector3::new(-1.0, -2.0, -3.0));
        assert_eq!(invert(&Pose::identity()), Pose::identity());
    }

    #[test]
    fn hemisphere_is_canonical() {
        let p = Pose::from_components([0.0; 3], [0.0, 0.0, 0.6, -0.8]);
        let [_, _, z, w] = p.quaternion_xyzw();
        assert!(w >= 0.0);
        assert_relative_eq!(z, -0.6);
        let p = Pose::from_components([0.0; 3], [0.0, -1.0, 0.0, 0.0]);
        assert_eq!(p.quaternion_xyzw(), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn euler_single_axis_yaw() {
        let e = Pose::from_rotation(q(Vector3::z(), FRAC_PI_2)).euler_angles();
        assert_relative_eq!(e.yaw, FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(e.pitch, 0.0, epsilon = 1e-12);
        assert_relative_eq!(e.roll, 0.0, epsilon = 1e-12);
        let e = Pose::identity().euler_angles();
        assert_eq!((e.roll, e.pitch, e.yaw), (0.0, 0.0, 0.0));
    }

    #[test]
    fn euler_gimbal_lock_folds_roll_into_yaw() {
        let e_in = EulerAngles::new(0.3, FRAC_PI_2, 0.5);
        let rot = e_in.to_rotation();
        let e = EulerAngles::from_rotation(&rot);
        assert_eq!(e.roll, 0.0);
        assert!(e.to_rotation().angle_to(&rot) < 1e-6);
    }

    #[test]
    fn mean_of_two_translations() {
        let r = q(Vector3::new(0.0, 1.0, 1.0), 0.4);
        let m = mean_pose(&[
            Pose::new(Vector3::zeros(), r),
            Pose::new(Vector3::new(2.0, 0.0, 0.0), r),
        ])
        .unwrap();
        assert_relative_eq!(m.translation(), Vector3::new(1.0, 0.0, 0.0));
        assert!(m.rotation().angle_to(&r) < 1e-12);
        assert!(matches!(mean_pose(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn circular_mean_cases() {
        assert_relative_eq!(circular_mean(&[0.1, 0.1]).unwrap(), 0.1, epsilon = 1e-15);
        let m = circular_mean(&[175f64.to_radians(), (-175f64).to_radians()]).unwrap();
        assert_relative_eq!(m, PI, epsilon = 1e-12);
        assert!(matches!(
            circular_mean(&[0.0, PI]),
            Err(Error::DegenerateMean(_))
        ));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -FRAC_PI_2);
    }
}
