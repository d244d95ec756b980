//! Image-based visual servoing for a quadruped with an arm.
//!
//! The pipeline: spherical image features of a moving target, a
//! super-twisting observer for its velocity, base and arm velocity
//! references, a single-rigid-body MPC for ground reaction forces, and
//! joint torque laws for legs and arm. Everything is generic over the
//! scalar; `f64` aliases live at the crate root.

pub mod arm_control;
pub mod error;
pub mod features;
pub mod kinematics;
pub mod locomotion;
pub mod observer;
pub mod qp;
pub mod scalar;
pub mod servo;

pub use error::{FeatureError, KinematicsError, MpcError, QpError, ServoError};
pub use scalar::Real;

// `f64` aliases for the common types.
pub type RobotState = kinematics::RobotState<f64>;
pub type KinematicModel = kinematics::KinematicModel<f64>;
pub type EulerZyx = kinematics::EulerZyx<f64>;
pub type VirtualPointSet = features::VirtualPointSet<f64>;
pub type VirtualFeature = features::VirtualFeature<f64>;
pub type CentroidFeature = features::CentroidFeature<f64>;
pub type ObserverGains = observer::ObserverGains<f64>;
pub type ObserverState = observer::ObserverState<f64>;
pub type ServoGains = servo::ServoGains<f64>;
pub type ArmGate = servo::ArmGate<f64>;
pub type ArmGains = arm_control::ArmGains<f64>;
pub type GaitSchedule = locomotion::GaitSchedule<f64>;
pub type LegGains = locomotion::LegGains<f64>;
pub type MpcConfig = locomotion::MpcConfig<f64>;
pub type SrbModel = locomotion::SrbModel<f64>;
pub type SrbState = locomotion::SrbState<f64>;
