//! Super-twisting observer for the target velocity in the camera frame.
//!
//! The observer runs a copy of the target centroid dynamics with the known
//! virtual gain `L_t` in place of the unknown `L_o`, and drives the copy onto
//! the measurement with super-twisting corrections. The integral state `y`
//! settles on the target velocity.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::scalar::{all_finite, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverGains<T> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub k4: T,
    /// Exponent in `(0, 0.5]`.
    pub p: T,
    /// Bound on `|y|`, m/s.
    pub y_max: T,
}

impl<T: Real> Default for ObserverGains<T> {
    fn default() -> Self {
        Self { k1: lit(10.0), k2: lit(100.0), k3: lit(0.05), k4: lit(0.05), p: lit(0.4), y_max: lit(2.0) }
    }
}

impl<T: Real> ObserverGains<T> {
    pub fn is_valid(&self) -> bool {
        self.k1 > T::zero()
            && self.k2 > T::zero()
            && self.k3 > T::zero()
            && self.k4 > T::zero()
            && self.p > T::zero()
            && self.p <= lit(0.5)
            && self.y_max > T::zero()
    }

    /// `φ₁(e) e` and `φ₂(e) e`, both exactly zero at `e = 0`.
    pub fn corrections(&self, e: &Vector3<T>) -> (Vector3<T>, Vector3<T>) {
        let n = e.norm();
        if n == T::zero() {
            return (Vector3::zeros(), Vector3::zeros());
        }
        let np = n.powf(-self.p);
        let phi1 = self.k3 * np + self.k4;
        let phi2 = (self.k3 * (T::one() - self.p) * np + self.k4) * phi1;
        (e * phi1, e * phi2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverState<T: Real> {
    pub h_hat: Vector3<T>,
    pub y: Vector3<T>,
}

/// Outcome of one observer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Updated,
    /// Inputs were not finite; the state was left unchanged.
    Rejected,
}

/// Starts the copy on the first measurement with zero velocity estimate.
pub fn sto_init<T: Real>(h_o: &Vector3<T>) -> ObserverState<T> {
    ObserverState { h_hat: *h_o, y: Vector3::zeros() }
}

/// One explicit Euler step of
///
/// ```text
/// ĥ̇ = −[Ω]× h_o − L_t v_c + k1 φ₁ e_o + L_t y
/// ẏ = k2 φ₂ e_o
/// ```
///
/// with `e_o = h_o − ĥ`. The transport term uses the measured `h_o`.
/// `|y|` is clamped to `gains.y_max`.
pub fn sto_step<T: Real>(
    state: &ObserverState<T>,
    h_o: &Vector3<T>,
    omega_c: &Vector3<T>,
    v_c: &Vector3<T>,
    l_t: &Matrix3<T>,
    gains: &ObserverGains<T>,
    dt: T,
) -> (ObserverState<T>, StepStatus) {
    if !(all_finite(h_o) && all_finite(omega_c) && all_finite(v_c) && all_finite(l_t)) || !(dt > T::zero()) {
        return (*state, StepStatus::Rejected);
    }
    let e = h_o - state.h_hat;
    let (c1, c2) = gains.corrections(&e);
    let h_dot = -omega_c.cross(h_o) - l_t * v_c + c1 * gains.k1 + l_t * state.y;
    let y_dot = c2 * gains.k2;
    let mut y = state.y + y_dot * dt;
    let n = y.norm();
    if n > gains.y_max {
        y *= gains.y_max / n;
    }
    (ObserverState { h_hat: state.h_hat + h_dot * dt, y }, StepStatus::Updated)
}

/// Current target velocity estimate in the camera frame.
pub fn sto_estimate<T: Real>(state: &ObserverState<T>) -> Vector3<T> {
    state.y
}
