use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::KinematicsError;
use crate::kinematics::{leg_jacobian_derivative, leg_kinematics, KinematicModel, LegModel};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegMode {
    Stance,
    Swing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegGains<T: Real> {
    pub kp_swing: Vector3<T>,
    pub kd_swing: Vector3<T>,
    pub kp_stance: Vector3<T>,
    pub kd_stance: Vector3<T>,
}

impl<T: Real> Default for LegGains<T> {
    fn default() -> Self {
        Self {
            kp_swing: Vector3::repeat(lit(300.0)),
            kd_swing: Vector3::repeat(lit(10.0)),
            kp_stance: Vector3::zeros(),
            kd_stance: Vector3::zeros(),
        }
    }
}

/// Reference for one foot, base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootReference<T: Real> {
    pub position: Vector3<T>,
    pub velocity: Vector3<T>,
    pub acceleration: Vector3<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegTorque<T: Real> {
    pub tau: Vector3<T>,
    /// Set when the operational-space inertia needed damping.
    pub damped: bool,
}

/// Joint-space inertia of a leg modelled as a point mass at the foot plus
/// rotor armature: `M = m JᵀJ + a I`.
pub fn leg_mass_matrix<T: Real>(legs: &LegModel<T>, jacobian: &Matrix3<T>) -> Matrix3<T> {
    jacobian.transpose() * jacobian * legs.foot_mass + Matrix3::identity() * legs.armature
}

/// Bias torque of the point-mass leg: `m Jᵀ (J̇ q̇ − g_B)`, with the base treated as fixed.
pub fn leg_bias<T: Real>(
    legs: &LegModel<T>,
    jacobian: &Matrix3<T>,
    jdot_qdot: &Vector3<T>,
    r_ib: &Rotation3<T>,
    gravity: T,
) -> Vector3<T> {
    let g_body = r_ib.inverse() * Vector3::new(T::zero(), T::zero(), -gravity);
    jacobian.transpose() * (jdot_qdot - g_body) * legs.foot_mass
}

/// Damping added when `J M⁻¹ Jᵀ` is badly conditioned.
pub const LAMBDA_DAMPING: f64 = 1e-6;
/// Reciprocal condition number below which damping is applied.
pub const LAMBDA_RCOND: f64 = 1e-8;

/// `τ = Jᵀ [Kp (p_ref − p) + Kd (v_ref − v)] + τ_ff`, with
/// stance `τ_ff = Jᵀ I R_Bᵀ f` and swing `τ_ff = Jᵀ Λ (a_ref − J̇ q̇) + n_leg`.
///
/// Positions and velocities are in the base frame; `f` is in the inertial frame.
#[allow(clippy::too_many_arguments)]
pub fn leg_torque<T: Real>(
    model: &KinematicModel<T>,
    leg: usize,
    mode: LegMode,
    reference: &FootReference<T>,
    q: &Vector3<T>,
    qd: &Vector3<T>,
    r_ib: &Rotation3<T>,
    f: &Vector3<T>,
    gains: &LegGains<T>,
    gravity: T,
) -> Result<LegTorque<T>, KinematicsError> {
    let legs = &model.legs;
    let k = leg_kinematics(model, leg, q)?;
    let jt = k.jacobian.transpose();
    let v = k.jacobian * qd;
    let (kp, kd) = match mode {
        LegMode::Stance => (gains.kp_stance, gains.kd_stance),
        LegMode::Swing => (gains.kp_swing, gains.kd_swing),
    };
    let pd = (reference.position - k.foot).component_mul(&kp) + (reference.velocity - v).component_mul(&kd);
    let mut damped = false;
    let ff = match mode {
        LegMode::Stance => jt * (r_ib.inverse() * f),
        LegMode::Swing => {
            let jdqd = leg_jacobian_derivative(model, leg, q, qd)?;
            let m = leg_mass_matrix(legs, &k.jacobian);
            let m_inv = m.try_inverse().ok_or_else(|| KinematicsError::ModelParameter("leg inertia singular".into()))?;
            let lambda_inv = k.jacobian * m_inv * jt;
            let eig = lambda_inv.symmetric_eigenvalues();
            let rcond = eig.min() / eig.max();
            let lambda: Option<Matrix3<T>> = if rcond > lit(LAMBDA_RCOND) {
                lambda_inv.try_inverse()
            } else {
                None
            };
            let lambda = lambda.unwrap_or_else(|| {
                damped = true;
                (lambda_inv + Matrix3::<T>::identity() * lit::<T>(LAMBDA_DAMPING)).try_inverse().unwrap_or_else(Matrix3::<T>::zeros)
            });
            jt * (lambda * (reference.acceleration - jdqd)) + leg_bias(legs, &k.jacobian, &jdqd, r_ib, gravity)
        }
    };
    Ok(LegTorque { tau: jt * pd + ff, damped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::KinematicModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> KinematicModel<f64> {
        KinematicModel::default()
    }

    fn stand_q() -> Vector3<f64> {
        Vector3::new(0.0, 0.8, -1.6)
    }

    #[test]
    fn zero_error_zero_feedforward_gives_zero() {
        let mdl = model();
        let q = stand_q();
        let k = leg_kinematics(&mdl, 0, &q).unwrap();
        let reference = FootReference { position: k.foot, velocity: Vector3::zeros(), acceleration: Vector3::zeros() };
        let out = leg_torque(&mdl, 0, LegMode::Stance, &reference, &q, &Vector3::zeros(), &Rotation3::identity(), &Vector3::zeros(), &LegGains { kp_stance: Vector3::repeat(100.0), kd_stance: Vector3::repeat(5.0), ..LegGains::default() }, 9.81).unwrap();
        assert_eq!(out.tau, Vector3::zeros());
    }

    #[test]
    fn stance_substitution() {
        let mdl = model();
        let q = stand_q();
        let k = leg_kinematics(&mdl, 1, &q).unwrap();
        let f = Vector3::new(0.0, 0.0, 22.4 * 9.81 / 4.0);
        let reference = FootReference { position: k.foot + Vector3::new(0.01, 0.0, 0.0), velocity: Vector3::zeros(), acceleration: Vector3::zeros() };
        let gains = LegGains { kp_stance: Vector3::repeat(50.0), ..LegGains::default() };
        let out = leg_torque(&mdl, 1, LegMode::Stance, &reference, &q, &Vector3::zeros(), &Rotation3::identity(), &f, &gains, 9.81).unwrap();
        let want = k.jacobian.transpose() * (f + Vector3::new(0.5, 0.0, 0.0));
        assert!((out.tau - want).norm() < 1e-12);
    }

    #[test]
    fn swing_matches_operational_space_evaluation() {
        let mdl = model();
        let l = mdl.legs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let leg = rng.random_range(0..4);
            let q = stand_q() + Vector3::from_fn(|_, _| rng.random_range(-0.4..0.4));
            let qd = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let r = Rotation3::from_euler_angles(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-3.0..3.0));
            let reference = FootReference {
                position: Vector3::from_fn(|_, _| rng.random_range(-0.3..0.3)),
                velocity: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                acceleration: Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0)),
            };
            let gains = LegGains::default();
            let got = leg_torque(&mdl, leg, LegMode::Swing, &reference, &q, &qd, &r, &Vector3::zeros(), &gains, 9.81).unwrap();
            assert!(!got.damped);

            // independent evaluation: Λ through an explicit 6×6 KKT-style block solve
            let k = leg_kinematics(&mdl, leg, &q).unwrap();
            let jdqd = leg_jacobian_derivative(&mdl, leg, &q, &qd).unwrap();
            let j = k.jacobian;
            let m = j.transpose() * j * l.foot_mass + Matrix3::identity() * l.armature;
            // Λ = (J M⁻¹ Jᵀ)⁻¹ = J⁻ᵀ M J⁻¹ for square invertible J
            let j_inv = j.try_inverse().unwrap();
            let lambda = j_inv.transpose() * m * j_inv;
            let g_body = r.inverse() * Vector3::new(0.0, 0.0, -9.81);
            let n = l.foot_mass * j.transpose() * (jdqd - g_body);
            let pd = (reference.position - k.foot).component_mul(&gains.kp_swing) + (reference.velocity - j * qd).component_mul(&gains.kd_swing);
            let want = j.transpose() * (pd + lambda * (reference.acceleration - jdqd)) + n;
            assert!((got.tau - want).norm() < 1e-9 * (1.0 + want.norm()), "{} vs {}", got.tau, want);
        }
    }

    #[test]
    fn swing_feedforward_realizes_foot_acceleration() {
        // M q̈ + n = τ with zero PD error gives J q̈ + J̇ q̇ = a_ref
        let mdl = model();
        let l = mdl.legs.clone();
        let q = stand_q();
        let qd = Vector3::new(0.5, -1.0, 2.0);
        let k = leg_kinematics(&mdl, 2, &q).unwrap();
        let a = Vector3::new(1.0, -2.0, 3.0);
        let reference = FootReference { position: k.foot, velocity: k.jacobian * qd, acceleration: a };
        let r = Rotation3::identity();
        let out = leg_torque(&mdl, 2, LegMode::Swing, &reference, &q, &qd, &r, &Vector3::zeros(), &LegGains::default(), 9.81).unwrap();
        let jdqd = leg_jacobian_derivative(&mdl, 2, &q, &qd).unwrap();
        let m = leg_mass_matrix(&l, &k.jacobian);
        let n = leg_bias(&l, &k.jacobian, &jdqd, &r, 9.81);
        let qdd = m.try_inverse().unwrap() * (out.tau - n);
        assert!((k.jacobian * qdd + jdqd - a).norm() < 1e-9);
    }

    #[test]
    fn singular_leg_uses_damping() {
        let mdl = model();
        // fully stretched knee is a kinematic singularity
        let q = Vector3::new(0.0, 0.3, 0.0);
        let reference = FootReference { position: Vector3::zeros(), velocity: Vector3::zeros(), acceleration: Vector3::new(0.0, 0.0, 1.0) };
        let out = leg_torque(&mdl, 0, LegMode::Swing, &reference, &q, &Vector3::zeros(), &Rotation3::identity(), &Vector3::zeros(), &LegGains::default(), 9.81).unwrap();
        assert!(out.damped);
        assert!(out.tau.iter().all(|t| t.is_finite()));
    }
}
