//! Base and arm velocity references from the visual error.

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Rotation3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::ServoError;
use crate::kinematics::{skew, EulerZyx};
use crate::scalar::{lit, to_f64, Real};

/// Singular-value ratio below which the arm map counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoGains<T: Real> {
    /// Diagonal of `K_b`, camera frame, 1/s.
    pub k_b: Vector3<T>,
    /// Diagonal of `K_a`, 1/s.
    pub k_a: Vector6<T>,
}

impl<T: Real> Default for ServoGains<T> {
    fn default() -> Self {
        // Isotropic: with a non-scalar K_b the closed loop `-L K_b e` is no
        // longer guaranteed to decrease |e|, and range errors leak in from
        // tangential motion.
        Self { k_b: Vector3::repeat(lit(3.0)), k_a: Vector6::repeat(lit(2.0)) }
    }
}

impl<T: Real> ServoGains<T> {
    pub fn is_valid(&self) -> bool {
        self.k_b.iter().all(|k| *k > T::zero()) && self.k_a.iter().all(|k| *k > T::zero())
    }
}

/// `v_B^d = I R_c (K_b e + v_T^c) + I R_B [B t_C]× ω_B`, inertial frame.
///
/// `omega_b` is the base angular velocity in the body frame.
pub fn base_reference_velocity<T: Real>(
    e: &Vector3<T>,
    v_t_camera: &Vector3<T>,
    omega_b: &Vector3<T>,
    r_ic: &Rotation3<T>,
    r_ib: &Rotation3<T>,
    t_camera_in_base: &Vector3<T>,
    gains: &ServoGains<T>,
) -> Vector3<T> {
    r_ic * (e.component_mul(&gains.k_b) + v_t_camera) + r_ib * (skew(t_camera_in_base) * omega_b)
}

/// `Aᵀ (A Aᵀ)⁻¹` for a 3×6 map of full row rank.
pub fn right_pseudo_inverse<T: Real>(a: &Matrix3x6<T>) -> Result<nalgebra::Matrix6x3<T>, ServoError> {
    let g: Matrix3<T> = a * a.transpose();
    let eig = g.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let ratio = if hi > T::zero() { (lo.max(T::zero()) / hi).sqrt() } else { T::zero() };
    if !(ratio >= lit(RANK_TOLERANCE)) {
        return Err(ServoError::NearSingular { ratio: to_f64(ratio) });
    }
    let inv = g.try_inverse().ok_or(ServoError::NearSingular { ratio: to_f64(ratio) })?;
    Ok(a.transpose() * inv)
}

/// `q̇_arm^d = K_a (L_t c'R_cᵀ J_t J_e)† e`.
pub fn arm_reference_rate<T: Real>(
    e: &Vector3<T>,
    l_t: &Matrix3<T>,
    r_virtual: &Rotation3<T>,
    j_t: &Matrix3x6<T>,
    j_e: &Matrix6<T>,
    k_a: &Vector6<T>,
) -> Result<Vector6<T>, ServoError> {
    let a = l_t * r_virtual.inverse().matrix() * j_t * j_e;
    Ok((right_pseudo_inverse(&a)? * e).component_mul(k_a))
}

/// Enables the arm only once the target is near the virtual feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmGate<T: Real> {
    /// Max angle between `h_o` and `h_t`, rad.
    pub cone_half_angle: T,
    /// Max `||h_o| − |h_t||`.
    pub norm_band: T,
}

impl<T: Real> Default for ArmGate<T> {
    fn default() -> Self {
        Self { cone_half_angle: lit(0.15), norm_band: lit(0.002) }
    }
}

impl<T: Real> ArmGate<T> {
    pub fn is_open(&self, h_o: &Vector3<T>, h_t: &Vector3<T>) -> bool {
        let (a, b) = (h_o.norm(), h_t.norm());
        if a == T::zero() || b == T::zero() {
            return false;
        }
        let c = (h_o.dot(h_t) / (a * b)).clamp(-T::one(), T::one());
        c.acos() <= self.cone_half_angle && (a - b).abs() <= self.norm_band
    }
}

/// One reference sample `(Φ_B^d, p_B^d, ω_B^d, v_B^d)` plus the arm reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample<T: Real> {
    pub orientation: EulerZyx<T>,
    pub p_b: Vector3<T>,
    /// Always zero: no attitude servoing.
    pub omega_b: Vector3<T>,
    pub v_b: Vector3<T>,
    pub q_arm: Vector6<T>,
    pub qd_arm: Vector6<T>,
    pub qdd_arm: Vector6<T>,
}

/// Integrates velocity references into positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceIntegrator<T: Real> {
    yaw: T,
    p_b: Vector3<T>,
    q_arm: Vector6<T>,
    prev_qd_arm: Option<Vector6<T>>,
}

impl<T: Real> ReferenceIntegrator<T> {
    pub fn new(p_b: Vector3<T>, yaw: T, q_arm: Vector6<T>) -> Self {
        Self { yaw, p_b, q_arm, prev_qd_arm: None }
    }

    /// Current sample before integrating `v_b`, `qd_arm` over `dt`.
    /// `q̈` is the backward difference of `q̇` (zero on the first step).
    pub fn step(&mut self, v_b: &Vector3<T>, qd_arm: &Vector6<T>, dt: T) -> ReferenceSample<T> {
        let qdd = match self.prev_qd_arm {
            Some(prev) => (qd_arm - prev) / dt,
            None => Vector6::zeros(),
        };
        let sample = ReferenceSample {
            orientation: EulerZyx::new(self.yaw, T::zero(), T::zero()),
            p_b: self.p_b,
            omega_b: Vector3::zeros(),
            v_b: *v_b,
            q_arm: self.q_arm,
            qd_arm: *qd_arm,
            qdd_arm: qdd,
        };
        self.p_b += v_b * dt;
        self.q_arm += qd_arm * dt;
        self.prev_qd_arm = Some(*qd_arm);
        sample
    }

    pub fn position(&self) -> Vector3<T> {
        self.p_b
    }

    pub fn q_arm(&self) -> Vector6<T> {
        self.q_arm
    }

    /// Re-anchors the arm reference, e.g. while the arm is gated off.
    pub fn reset_arm(&mut self, q_arm: Vector6<T>) {
        self.q_arm = q_arm;
        self.prev_qd_arm = None;
    }

    /// Re-anchors the base position reference.
    pub fn reset_position(&mut self, p_b: Vector3<T>) {
        self.p_b = p_b;
    }

    /// Base reference over a horizon, holding `v_b` constant from the
    /// current position.
    pub fn horizon(&self, v_b: &Vector3<T>, steps: usize, dt: T) -> Vec<ReferenceSample<T>> {
        (1..=steps)
            .map(|k| ReferenceSample {
                orientation: EulerZyx::new(self.yaw, T::zero(), T::zero()),
                p_b: self.p_b + v_b * (dt * lit(k as f64)),
                omega_b: Vector3::zeros(),
                v_b: *v_b,
                q_arm: self.q_arm,
                qd_arm: Vector6::zeros(),
                qdd_arm: Vector6::zeros(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory<T: Real> {
    pub samples: Vec<ReferenceSample<T>>,
    pub dt: T,
}

/// Integrates streams of base velocity and arm rate references sampled at `dt`.
pub fn integrate_reference<T: Real>(
    p_b0: Vector3<T>,
    yaw: T,
    q_arm0: Vector6<T>,
    v_b: &[Vector3<T>],
    qd_arm: &[Vector6<T>],
    dt: T,
) -> ReferenceTrajectory<T> {
    let mut integ = ReferenceIntegrator::new(p_b0, yaw, q_arm0);
    let samples = v_b.iter().zip(qd_arm).map(|(v, qd)| integ.step(v, qd, dt)).collect();
    ReferenceTrajectory { samples, dt }
}
