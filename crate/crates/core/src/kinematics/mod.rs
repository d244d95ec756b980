//! Frames, rotations, limb kinematics and the floating-base arm dynamics.
//!
//! Conventions used everywhere in the crate:
//!
//! * The inertial frame `I` is right-handed with `z` opposite to gravity.
//! * Base orientation is ZYX Euler: `R_IB = Rz(yaw) · Ry(pitch) · Rx(roll)`.
//! * Base linear velocity is stored in `I`, base angular velocity in `B`.
//! * Spatial 6-vectors are ordered `[angular; linear]`.

mod arm;
mod dynamics;
mod leg;
mod model;

pub use arm::{arm_forward_kinematics, arm_jacobian, arm_link_frames};
pub use dynamics::{
    composite_com, coupled_arm_dynamics, floating_base_bias, floating_base_mass_matrix, rnea_floating, CoupledArmDynamics,
};
pub use leg::{leg_inverse_kinematics, leg_kinematics, leg_jacobian_derivative, LegKinematics};
pub use model::{forward_camera_rotation, ArmJoint, ArmModel, KinematicModel, LegModel, Leg, LEG_COUNT};

use nalgebra::{Matrix3, Rotation3, SVector, Vector3, Vector6};

use crate::error::KinematicsError;
use crate::scalar::{lit, Real};

/// Margin kept from ±π/2 pitch.
pub const PITCH_SINGULARITY_MARGIN: f64 = 1e-6;

/// Base orientation as ZYX Euler angles, radians.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EulerZyx<T> {
    pub yaw: T,
    pub pitch: T,
    pub roll: T,
}

impl<T: Real> EulerZyx<T> {
    pub fn new(yaw: T, pitch: T, roll: T) -> Self {
        Self { yaw, pitch, roll }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    /// Same yaw, roll and pitch zeroed.
    pub fn level(&self) -> Self {
        Self::new(self.yaw, T::zero(), T::zero())
    }

    pub fn is_singular(&self) -> bool {
        self.pitch.abs() >= T::frac_pi_2() - lit(PITCH_SINGULARITY_MARGIN)
    }

    /// Maps Euler angle rates `(roll_dot, pitch_dot, yaw_dot)` to the body angular velocity.
    pub fn rates_to_body_angular_velocity(&self, roll_dot: T, pitch_dot: T, yaw_dot: T) -> Vector3<T> {
        let (sr, cr) = self.roll.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        Vector3::new(
            roll_dot - yaw_dot * sp,
            pitch_dot * cr + yaw_dot * sr * cp,
            -pitch_dot * sr + yaw_dot * cr * cp,
        )
    }

    /// Inverse of [`Self::rates_to_body_angular_velocity`]; returns `(roll_dot, pitch_dot, yaw_dot)`.
    pub fn body_angular_velocity_to_rates(&self, w: &Vector3<T>) -> Result<Vector3<T>, KinematicsError> {
        if self.is_singular() {
            return Err(KinematicsError::SingularPitch { pitch: crate::scalar::to_f64(self.pitch) });
        }
        let (sr, cr) = self.roll.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let yaw_dot = (w.y * sr + w.z * cr) / cp;
        let pitch_dot = w.y * cr - w.z * sr;
        let roll_dot = w.x + yaw_dot * sp;
        Ok(Vector3::new(roll_dot, pitch_dot, yaw_dot))
    }
}

/// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn euler_to_rotation<T: Real>(angles: &EulerZyx<T>) -> Result<Rotation3<T>, KinematicsError> {
    if angles.is_singular() {
        return Err(KinematicsError::SingularPitch { pitch: crate::scalar::to_f64(angles.pitch) });
    }
    Ok(axis_rotation_z(angles.yaw) * axis_rotation_y(angles.pitch) * axis_rotation_x(angles.roll))
}

/// Extracts ZYX Euler angles; pitch is returned in `[-π/2, π/2]`.
pub fn rotation_to_euler<T: Real>(r: &Rotation3<T>) -> EulerZyx<T> {
    let m = r.matrix();
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    let pitch = (-m[(2, 0)]).atan2((m[(2, 1)] * m[(2, 1)] + m[(2, 2)] * m[(2, 2)]).sqrt());
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    EulerZyx::new(yaw, pitch, roll)
}

pub fn axis_rotation_x<T: Real>(a: T) -> Rotation3<T> {
    let (s, c) = a.sin_cos();
    let o = T::one();
    let z = T::zero();
    Rotation3::from_matrix_unchecked(Matrix3::new(o, z, z, z, c, -s, z, s, c))
}

pub fn axis_rotation_y<T: Real>(a: T) -> Rotation3<T> {
    let (s, c) = a.sin_cos();
    let o = T::one();
    let z = T::zero();
    Rotation3::from_matrix_unchecked(Matrix3::new(c, z, s, z, o, z, -s, z, c))
}

pub fn axis_rotation_z<T: Real>(a: T) -> Rotation3<T> {
    let (s, c) = a.sin_cos();
    let o = T::one();
    let z = T::zero();
    Rotation3::from_matrix_unchecked(Matrix3::new(c, -s, z, s, c, z, z, z, o))
}

/// `[v]×`, so that `skew(v) * w == v.cross(&w)`.
pub fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Rotation `c'R_c` from the actual camera frame to the virtual camera frame
/// whose attitude has the base roll and pitch removed (yaw kept).
///
/// `camera_in_base` is the fixed rotation `B R_C` of the camera extrinsics.
/// A virtual-frame point `Q'` expressed in actual camera coordinates is
/// `c'R_cᵀ · Q`.
pub fn virtual_plane_rotation<T: Real>(
    base: &EulerZyx<T>,
    camera_in_base: &Rotation3<T>,
) -> Result<Rotation3<T>, KinematicsError> {
    let tilt = euler_to_rotation(&EulerZyx::new(T::zero(), base.pitch, base.roll))?;
    Ok(camera_in_base.inverse() * tilt * camera_in_base)
}

/// Number of actuated joints: 4 legs × 3 + 6 arm joints.
pub const JOINT_COUNT: usize = 18;
/// Index of the first arm joint inside `q_j`.
pub const ARM_OFFSET: usize = 12;

/// Generalized coordinates and velocities of the quadruped manipulator.
///
/// Joint layout: legs FL, FR, RL, RR (3 joints each: abduction, hip, knee)
/// followed by the 6 arm joints, matching the arm selection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState<T: Real> {
    /// Base position in `I`, m.
    pub p_b: Vector3<T>,
    pub orientation: EulerZyx<T>,
    /// Joint angles, rad.
    pub q_j: SVector<T, JOINT_COUNT>,
    /// Base linear velocity in `I`, m/s.
    pub v_b: Vector3<T>,
    /// Base angular velocity in `B`, rad/s.
    pub omega_b: Vector3<T>,
    /// Joint rates, rad/s.
    pub qd_j: SVector<T, JOINT_COUNT>,
}

impl<T: Real> RobotState<T> {
    pub fn zeros() -> Self {
        Self {
            p_b: Vector3::zeros(),
            orientation: EulerZyx::zero(),
            q_j: SVector::zeros(),
            v_b: Vector3::zeros(),
            omega_b: Vector3::zeros(),
            qd_j: SVector::zeros(),
        }
    }

    pub fn q_arm(&self) -> Vector6<T> {
        self.q_j.fixed_rows::<6>(ARM_OFFSET).into_owned()
    }

    pub fn qd_arm(&self) -> Vector6<T> {
        self.qd_j.fixed_rows::<6>(ARM_OFFSET).into_owned()
    }

    pub fn set_q_arm(&mut self, q: &Vector6<T>) {
        self.q_j.fixed_rows_mut::<6>(ARM_OFFSET).copy_from(q);
    }

    pub fn set_qd_arm(&mut self, qd: &Vector6<T>) {
        self.qd_j.fixed_rows_mut::<6>(ARM_OFFSET).copy_from(qd);
    }

    pub fn q_leg(&self, leg: usize) -> Vector3<T> {
        self.q_j.fixed_rows::<3>(3 * leg).into_owned()
    }

    pub fn qd_leg(&self, leg: usize) -> Vector3<T> {
        self.qd_j.fixed_rows::<3>(3 * leg).into_owned()
    }

    pub fn set_q_leg(&mut self, leg: usize, q: &Vector3<T>) {
        self.q_j.fixed_rows_mut::<3>(3 * leg).copy_from(q);
    }

    pub fn set_qd_leg(&mut self, leg: usize, qd: &Vector3<T>) {
        self.qd_j.fixed_rows_mut::<3>(3 * leg).copy_from(qd);
    }

    /// `I R_B`.
    pub fn rotation(&self) -> Result<Rotation3<T>, KinematicsError> {
        euler_to_rotation(&self.orientation)
    }

    /// Base twist in body coordinates, `[ω; v]`.
    pub fn base_twist_body(&self) -> Result<Vector6<T>, KinematicsError> {
        let r = self.rotation()?;
        let v = r.inverse() * self.v_b;
        Ok(Vector6::new(self.omega_b.x, self.omega_b.y, self.omega_b.z, v.x, v.y, v.z))
    }

    pub fn is_finite(&self) -> bool {
        crate::scalar::all_finite(&self.p_b)
            && crate::scalar::all_finite(&self.q_j)
            && crate::scalar::all_finite(&self.v_b)
            && crate::scalar::all_finite(&self.omega_b)
            && crate::scalar::all_finite(&self.qd_j)
            && self.orientation.yaw.is_finite()
            && self.orientation.pitch.is_finite()
            && self.orientation.roll.is_finite()
    }
}
