use nalgebra::{Matrix3, Vector3};

use super::model::{KinematicModel, Leg};
use super::{axis_rotation_x, skew};
use crate::error::KinematicsError;
use crate::scalar::{lit, Real};

/// Foot position in the base frame and the matching 3×3 Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegKinematics<T: Real> {
    pub foot: Vector3<T>,
    pub jacobian: Matrix3<T>,
}

// Foot position in the abduction-rotated frame, relative to the hip.
fn planar<T: Real>(model: &KinematicModel<T>, leg: Leg, q: &Vector3<T>) -> Vector3<T> {
    let l = &model.legs;
    let (s2, c2) = q[1].sin_cos();
    let (s23, c23) = (q[1] + q[2]).sin_cos();
    Vector3::new(
        -l.thigh * s2 - l.calf * s23,
        lit::<T>(leg.side()) * l.abduction_offset,
        -l.thigh * c2 - l.calf * c23,
    )
}

/// Foot position in `B` and its Jacobian with respect to the leg joints.
pub fn leg_kinematics<T: Real>(
    model: &KinematicModel<T>,
    leg_index: usize,
    q: &Vector3<T>,
) -> Result<LegKinematics<T>, KinematicsError> {
    let leg = Leg::from_index(leg_index)?;
    let l = &model.legs;
    let rx = axis_rotation_x(q[0]);
    let u = planar(model, leg, q);
    let foot = model.legs.hips[leg_index] + rx * u;

    let (s2, c2) = q[1].sin_cos();
    let (s23, c23) = (q[1] + q[2]).sin_cos();
    let d1 = rx * (skew(&Vector3::x()) * u);
    let d2 = rx * Vector3::new(-l.thigh * c2 - l.calf * c23, T::zero(), l.thigh * s2 + l.calf * s23);
    let d3 = rx * Vector3::new(-l.calf * c23, T::zero(), l.calf * s23);
    Ok(LegKinematics { foot, jacobian: Matrix3::from_columns(&[d1, d2, d3]) })
}

/// `J̇(q, q̇) · q̇`, the velocity-product part of the foot acceleration.
pub fn leg_jacobian_derivative<T: Real>(
    model: &KinematicModel<T>,
    leg_index: usize,
    q: &Vector3<T>,
    qd: &Vector3<T>,
) -> Result<Vector3<T>, KinematicsError> {
    let leg = Leg::from_index(leg_index)?;
    let l = &model.legs;
    let rx = axis_rotation_x(q[0]);
    let k = skew(&Vector3::<T>::x());
    let u = planar(model, leg, q);
    let (s2, c2) = q[1].sin_cos();
    let (s23, c23) = (q[1] + q[2]).sin_cos();
    let w2 = qd[1];
    let w23 = qd[1] + qd[2];
    let ud = Vector3::new(-l.thigh * c2 * w2 - l.calf * c23 * w23, T::zero(), l.thigh * s2 * w2 + l.calf * s23 * w23);
    let udd = Vector3::new(
        l.thigh * s2 * w2 * w2 + l.calf * s23 * w23 * w23,
        T::zero(),
        l.thigh * c2 * w2 * w2 + l.calf * c23 * w23 * w23,
    );
    let two: T = lit(2.0);
    Ok(rx * (k * k * u * (qd[0] * qd[0]) + k * ud * (two * qd[0]) + udd))
}

/// Analytic inverse kinematics for a foot position in `B`, knee bent backwards (`q[2] < 0`)
/// and the foot below the hip in the leg plane.
pub fn leg_inverse_kinematics<T: Real>(
    model: &KinematicModel<T>,
    leg_index: usize,
    foot: &Vector3<T>,
) -> Result<Vector3<T>, KinematicsError> {
    let leg = Leg::from_index(leg_index)?;
    let l = &model.legs;
    let p = foot - model.legs.hips[leg_index];
    let side: T = lit(leg.side());
    let lateral = side * l.abduction_offset;
    let yz2 = p.y * p.y + p.z * p.z;
    let drop2 = yz2 - l.abduction_offset * l.abduction_offset;
    if drop2 <= T::zero() {
        return Err(KinematicsError::Unreachable { leg: leg_index });
    }
    let drop = drop2.sqrt();
    let q1 = p.z.atan2(p.y) - (-drop).atan2(lateral);
    let reach2 = p.x * p.x + drop2;
    let cos_knee = (reach2 - l.thigh * l.thigh - l.calf * l.calf) / (lit::<T>(2.0) * l.thigh * l.calf);
    if cos_knee > T::one() || cos_knee < -T::one() {
        return Err(KinematicsError::Unreachable { leg: leg_index });
    }
    let q3 = -cos_knee.acos();
    let q2 = (-p.x).atan2(drop) - (l.calf * q3.sin()).atan2(l.thigh + l.calf * q3.cos());
    let two_pi = T::two_pi();
    let wrap = |a: T| {
        let mut a = a;
        while a > T::pi() {
            a -= two_pi;
        }
        while a < -T::pi() {
            a += two_pi;
        }
        a
    };
    Ok(Vector3::new(wrap(q1), wrap(q2), q3))
}
