//! Computed-torque arm control on the floating-base reduced dynamics.
//!
//! The tracking error is desired minus actual, `e = q^d − q`. The commanded
//! acceleration `q̈ = q̈^d + K_d ė + K_p e` is mapped through
//! `τ = M_fl q̈ + n_fl`, which linearizes the error dynamics exactly when the
//! model matches the plant.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::kinematics::{coupled_arm_dynamics, CoupledArmDynamics, KinematicModel, RobotState};
use crate::scalar::{all_finite, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmGains<T: Real> {
    /// Diagonal of `K_p`, 1/s².
    pub kp: Vector6<T>,
    /// Diagonal of `K_d`, 1/s.
    pub kd: Vector6<T>,
    /// Symmetric per-joint torque bound, N·m.
    pub torque_limit: T,
}

impl<T: Real> Default for ArmGains<T> {
    fn default() -> Self {
        Self { kp: Vector6::repeat(lit(100.0)), kd: Vector6::repeat(lit(20.0)), torque_limit: lit(30.0) }
    }
}

impl<T: Real> ArmGains<T> {
    pub fn is_valid(&self) -> bool {
        self.kp.iter().all(|k| *k > T::zero()) && self.kd.iter().all(|k| *k > T::zero()) && self.torque_limit > T::zero()
    }
}

/// Desired joint trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmReference<T: Real> {
    pub q: Vector6<T>,
    pub qd: Vector6<T>,
    pub qdd: Vector6<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmTorque<T: Real> {
    pub tau: Vector6<T>,
    /// At least one joint hit the torque bound.
    pub saturated: bool,
    /// The dynamics were unusable; `tau` is zero.
    pub fault: bool,
}

impl<T: Real> ArmTorque<T> {
    fn fault() -> Self {
        Self { tau: Vector6::zeros(), saturated: false, fault: true }
    }
}

/// Torque from precomputed dynamics terms.
pub fn arm_torque_with<T: Real>(
    reference: &ArmReference<T>,
    q: &Vector6<T>,
    qd: &Vector6<T>,
    dynamics: &CoupledArmDynamics<T>,
    gains: &ArmGains<T>,
) -> ArmTorque<T> {
    if !all_finite(&dynamics.m_fl) || !all_finite(&dynamics.n_fl) {
        return ArmTorque::fault();
    }
    let e = reference.q - q;
    let ed = reference.qd - qd;
    let qdd = reference.qdd + ed.component_mul(&gains.kd) + e.component_mul(&gains.kp);
    let raw = dynamics.m_fl * qdd + dynamics.n_fl;
    if !all_finite(&raw) {
        return ArmTorque::fault();
    }
    let lim = gains.torque_limit;
    let tau = raw.map(|t| t.clamp(-lim, lim));
    ArmTorque { saturated: tau != raw, tau, fault: false }
}

/// `τ = M_fl (q̈^d + K_d ė + K_p e) + n_fl`, clamped to the torque bound.
///
/// A state the dynamics cannot evaluate (singular pitch, non-SPD inertia,
/// non-finite terms) yields the zero-torque safe output with `fault` set.
pub fn arm_torque<T: Real>(
    model: &KinematicModel<T>,
    reference: &ArmReference<T>,
    state: &RobotState<T>,
    gains: &ArmGains<T>,
    gravity: T,
) -> ArmTorque<T> {
    match coupled_arm_dynamics(model, state, gravity) {
        Ok(d) => arm_torque_with(reference, &state.q_arm(), &state.qd_arm(), &d, gains),
        Err(_) => ArmTorque::fault(),
    }
}
