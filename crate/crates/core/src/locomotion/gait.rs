use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::LEG_COUNT;
use crate::scalar::{lit, Real};

/// Periodic open-loop contact schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSchedule<T: Real> {
    /// Seconds.
    pub period: T,
    /// Stance fraction of the period.
    pub duty: T,
    /// Phase offsets in cycles, leg order FL, FR, RL, RR.
    pub offsets: [T; LEG_COUNT],
}

impl<T: Real> Default for GaitSchedule<T> {
    fn default() -> Self {
        Self::trot()
    }
}

impl<T: Real> GaitSchedule<T> {
    pub fn trot() -> Self {
        let h = lit(0.5);
        Self { period: lit(0.4), duty: h, offsets: [T::zero(), h, h, T::zero()] }
    }

    /// All legs on the ground permanently.
    pub fn stand() -> Self {
        Self { period: T::one(), duty: T::one(), offsets: [T::zero(); LEG_COUNT] }
    }

    pub fn stance_time(&self) -> T {
        self.period * self.duty
    }

    pub fn swing_time(&self) -> T {
        self.period - self.stance_time()
    }

    /// Phase of `leg` in `[0, 1)` at time `t`.
    pub fn phase(&self, t: T, leg: usize) -> T {
        let base = (t / self.period).fract();
        let base = if base < T::zero() { base + T::one() } else { base };
        let p = (base + self.offsets[leg]).fract();
        if p < T::zero() { p + T::one() } else { p }
    }

    pub fn contacts(&self, t: T) -> [bool; LEG_COUNT] {
        std::array::from_fn(|leg| self.phase(t, leg) < self.duty)
    }

    /// Contact flags at `t + k·dt` for `k = 0..steps`.
    pub fn horizon(&self, t: T, steps: usize, dt: T) -> Vec<[bool; LEG_COUNT]> {
        (0..steps).map(|k| self.contacts(t + dt * lit(k as f64))).collect()
    }

    /// Progress through the current swing in `[0, 1)`, or `None` in stance.
    pub fn swing_progress(&self, t: T, leg: usize) -> Option<T> {
        let p = self.phase(t, leg);
        if p < self.duty {
            None
        } else {
            Some((p - self.duty) / (T::one() - self.duty))
        }
    }
}

/// `p_hip + (T_stance / 2) v + k (v − v_d)`, dropped to `ground_z`.
pub fn raibert_footstep<T: Real>(
    hip: &Vector3<T>,
    v: &Vector3<T>,
    v_desired: &Vector3<T>,
    stance_time: T,
    k_step: T,
    ground_z: T,
) -> Vector3<T> {
    let mut p = hip + v * (stance_time * lit(0.5)) + (v - v_desired) * k_step;
    p.z = ground_z;
    p
}
