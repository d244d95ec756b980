use nalgebra::{Cholesky, Isometry3, Matrix3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3, Vector6};

use serde::{Deserialize, Serialize};

use crate::error::KinematicsError;
use crate::scalar::{lit, Real};

pub const LEG_COUNT: usize = 4;

/// Leg order used for every per-leg array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    FrontLeft = 0,
    FrontRight = 1,
    RearLeft = 2,
    RearRight = 3,
}

impl Leg {
    pub const ALL: [Leg; LEG_COUNT] = [Leg::FrontLeft, Leg::FrontRight, Leg::RearLeft, Leg::RearRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Leg, KinematicsError> {
        Leg::ALL.get(i).copied().ok_or(KinematicsError::LegIndex(i))
    }

    /// +1 for left legs, -1 for right legs.
    pub fn side(self) -> f64 {
        match self {
            Leg::FrontLeft | Leg::RearLeft => 1.0,
            Leg::FrontRight | Leg::RearRight => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Leg::FrontLeft => "fl",
            Leg::FrontRight => "fr",
            Leg::RearLeft => "rl",
            Leg::RearRight => "rr",
        }
    }
}

/// One revolute arm joint and the link it drives.
///
/// The joint frame is reached from the previous frame by translating by
/// `offset`, then rotating by `q` about `axis`. The link body is rigidly
/// attached to that joint frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmJoint<T: Real> {
    pub offset: Vector3<T>,
    pub axis: Unit<Vector3<T>>,
    pub mass: T,
    /// Center of mass in the joint frame.
    pub com: Vector3<T>,
    /// Rotational inertia about the center of mass, joint-frame axes.
    pub inertia: Matrix3<T>,
}

/// Serial 6R manipulator, frame `S` to end-effector frame `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmModel<T: Real> {
    pub joints: [ArmJoint<T>; 6],
    /// Fixed offset from the last joint frame to the end-effector origin.
    pub tool: Vector3<T>,
}

/// Three-joint legs: abduction about body `x`, hip and knee about `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegModel<T: Real> {
    /// Hip (abduction joint) positions in the base frame, leg order FL, FR, RL, RR.
    pub hips: [Vector3<T>; LEG_COUNT],
    /// Lateral offset from abduction axis to the thigh plane, m (positive outward).
    pub abduction_offset: T,
    pub thigh: T,
    pub calf: T,
    /// Point mass lumped at the foot, kg.
    pub foot_mass: T,
    /// Reflected rotor inertia added to every leg joint, kg·m².
    pub armature: T,
}

/// Complete geometric and inertial description of the robot.
///
/// Default values describe a 0.65 m × 0.3 m trunk (hips at ±0.25 m, ±0.10 m)
/// with 0.25 m thigh and calf links, a 4.4 kg 6R arm mounted on top and a
/// camera on the front face pitched down by 0.6 rad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicModel<T: Real> {
    pub arm: ArmModel<T>,
    pub legs: LegModel<T>,
    /// `B t_C`: camera origin in the base frame.
    pub camera_translation: Vector3<T>,
    /// `B R_C`: camera axes in the base frame (`z` is the optical axis).
    pub camera_rotation: Rotation3<T>,
    /// `B t_S`: arm base origin in the base frame.
    pub arm_mount_translation: Vector3<T>,
    pub arm_mount_rotation: Rotation3<T>,
    /// Trunk mass including the lumped leg masses, kg.
    pub base_mass: T,
    /// Trunk inertia about its center of mass (the base origin), kg·m².
    pub base_inertia: Matrix3<T>,
    /// Nominal standing height of the base origin above flat ground, m.
    pub nominal_height: T,
    /// Arm configuration used at start-up and for the SRB composite inertia.
    pub arm_home: Vector6<T>,
}

/// Camera rotation for an optical axis along base `x`, pitched down by `tilt`.
pub fn forward_camera_rotation<T: Real>(tilt: T) -> Rotation3<T> {
    let (s, c) = tilt.sin_cos();
    let z = T::zero();
    let o = T::one();
    Rotation3::from_matrix_unchecked(Matrix3::new(
        z, -s, c, //
        -o, z, z, //
        z, -c, -s,
    ))
}

fn diag<T: Real>(a: f64, b: f64, c: f64) -> Matrix3<T> {
    Matrix3::from_diagonal(&Vector3::new(lit(a), lit(b), lit(c)))
}

fn v3<T: Real>(x: f64, y: f64, z: f64) -> Vector3<T> {
    Vector3::new(lit(x), lit(y), lit(z))
}

impl<T: Real> ArmModel<T> {
    pub fn total_mass(&self) -> T {
        self.joints.iter().fold(T::zero(), |acc, j| acc + j.mass)
    }
}

impl<T: Real> Default for ArmModel<T> {
    fn default() -> Self {
        let x = Vector3::x_axis();
        let y = Vector3::y_axis();
        let z = Vector3::z_axis();
        let joint = |offset: Vector3<T>, axis, mass: f64, com: Vector3<T>, inertia| ArmJoint {
            offset,
            axis,
            mass: lit(mass),
            com,
            inertia,
        };
        ArmModel {
            joints: [
                joint(v3(0.0, 0.0, 0.10), z, 0.9, v3(0.0, 0.0, 0.025), diag(0.0020, 0.0020, 0.0015)),
                joint(v3(0.0, 0.0, 0.05), y, 1.2, v3(0.175, 0.0, 0.0), diag(0.0015, 0.0125, 0.0125)),
                joint(v3(0.35, 0.0, 0.0), y, 0.9, v3(0.075, 0.0, 0.0), diag(0.0010, 0.0025, 0.0025)),
                joint(v3(0.15, 0.0, 0.0), x, 0.5, v3(0.075, 0.0, 0.0), diag(0.0005, 0.0010, 0.0010)),
                joint(v3(0.15, 0.0, 0.0), y, 0.5, v3(0.025, 0.0, 0.0), diag(0.0004, 0.0004, 0.0004)),
                joint(v3(0.05, 0.0, 0.0), x, 0.4, v3(0.040, 0.0, 0.0), diag(0.0004, 0.0005, 0.0005)),
            ],
            tool: v3(0.08, 0.0, 0.0),
        }
    }
}

impl<T: Real> Default for LegModel<T> {
    fn default() -> Self {
        LegModel {
            hips: [v3(0.25, 0.10, 0.0), v3(0.25, -0.10, 0.0), v3(-0.25, 0.10, 0.0), v3(-0.25, -0.10, 0.0)],
            abduction_offset: lit(0.08),
            thigh: lit(0.25),
            calf: lit(0.25),
            foot_mass: lit(0.3),
            armature: lit(0.005),
        }
    }
}

impl<T: Real> Default for KinematicModel<T> {
    fn default() -> Self {
        KinematicModel {
            arm: ArmModel::default(),
            legs: LegModel::default(),
            camera_translation: v3(0.30, 0.0, 0.05),
            camera_rotation: forward_camera_rotation(lit(0.6)),
            arm_mount_translation: v3(0.15, 0.0, 0.10),
            arm_mount_rotation: Rotation3::identity(),
            base_mass: lit(18.0),
            base_inertia: diag(0.08, 0.30, 0.33),
            nominal_height: lit(0.38),
            arm_home: Vector6::new(T::zero(), lit(-0.256), lit(1.79), T::zero(), lit(-0.53), T::zero()),
        }
    }
}

fn is_spd<T: Real>(m: &Matrix3<T>) -> bool {
    let sym = (m - m.transpose()).abs().max() <= lit::<T>(1e-12) * (T::one() + m.abs().max());
    sym && Cholesky::new(*m).is_some()
}

impl<T: Real> KinematicModel<T> {
    /// Checks positivity of lengths and masses and that every inertia is SPD.
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let err = |s: String| Err(KinematicsError::ModelParameter(s));
        let l = &self.legs;
        for (name, v) in [("abduction_offset", l.abduction_offset), ("thigh", l.thigh), ("calf", l.calf)] {
            if !(v > T::zero()) {
                return err(format!("leg {name} must be > 0"));
            }
        }
        if !(l.foot_mass > T::zero()) || l.armature < T::zero() {
            return err("leg foot_mass must be > 0 and armature >= 0".into());
        }
        if !(self.base_mass > T::zero()) || !is_spd(&self.base_inertia) {
            return err("base mass must be > 0 and base inertia SPD".into());
        }
        for (i, j) in self.arm.joints.iter().enumerate() {
            if !(j.mass > T::zero()) || !is_spd(&j.inertia) {
                return err(format!("arm link {i}: mass must be > 0 and inertia SPD"));
            }
            if !((j.axis.norm() - T::one()).abs() < lit(1e-9)) {
                return err(format!("arm joint {i}: axis must be unit length"));
            }
        }
        let reach = self.arm.joints.iter().fold(self.arm.tool.norm(), |a, j| a + j.offset.norm());
        if !(reach > T::zero()) {
            return err("arm has zero reach".into());
        }
        if !(self.nominal_height > T::zero()) {
            return err("nominal_height must be > 0".into());
        }
        Ok(())
    }

    pub fn total_mass(&self) -> T {
        self.base_mass + self.arm.total_mass()
    }

    /// `B T_C` as an isometry.
    pub fn camera_pose(&self) -> Isometry3<T> {
        Isometry3::from_parts(
            Translation3::from(self.camera_translation),
            UnitQuaternion::from_rotation_matrix(&self.camera_rotation),
        )
    }

    /// `B T_S` as an isometry.
    pub fn arm_mount_pose(&self) -> Isometry3<T> {
        Isometry3::from_parts(
            Translation3::from(self.arm_mount_translation),
            UnitQuaternion::from_rotation_matrix(&self.arm_mount_rotation),
        )
    }

    /// `C R_S`: arm base axes seen from the camera.
    pub fn arm_in_camera_rotation(&self) -> Rotation3<T> {
        self.camera_rotation.inverse() * self.arm_mount_rotation
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_valid() {
        let m = KinematicModel::<f64>::default();
        m.validate().unwrap();
        assert!((m.arm.total_mass() - 4.4).abs() < 1e-12);
        let r = m.camera_rotation;
        assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
        assert!((r.matrix().transpose() * r.matrix() - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut m = KinematicModel::<f64>::default();
        m.legs.thigh = 0.0;
        assert!(m.validate().is_err());
        let mut m = KinematicModel::<f64>::default();
        m.arm.joints[2].inertia[(0, 1)] = 0.5;
        assert!(m.validate().is_err());
        let mut m = KinematicModel::<f64>::default();
        m.base_inertia = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(m.validate().is_err());
    }

    #[test]
    fn camera_looks_forward_and_down() {
        let m = KinematicModel::<f64>::default();
        let optical = m.camera_rotation * Vector3::z();
        assert!(optical.x > 0.8 && optical.z < -0.5);
    }
}
