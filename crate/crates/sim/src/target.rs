//! Scripted target trajectories. The target never rotates.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Marker positions relative to the target origin: a horizontal 0.1 m
/// square whose plane sits 0.15 m below the origin.
pub const MARKER_OFFSETS: [[f64; 3]; 4] =
    [[0.05, 0.05, -0.15], [-0.05, 0.05, -0.15], [-0.05, -0.05, -0.15], [0.05, -0.05, -0.15]];

pub fn marker_offsets() -> Vec<Vector3<f64>> {
    MARKER_OFFSETS.iter().map(|d| Vector3::from(*d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetMotion {
    Static,
    /// Constant speed along the heading.
    ConstantLine { speed: f64 },
    /// Starts at rest, accelerates along the heading until the cap.
    AcceleratingLine { acceleration: f64, speed_cap: f64 },
    /// Constant speed along the heading; the lateral speed ramps at
    /// `±lateral_acceleration` and reverses each time it reaches the cap.
    SCurve { speed: f64, lateral_acceleration: f64, lateral_speed_cap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetScript {
    pub motion: TargetMotion,
    /// Target origin at `t = 0`, inertial frame, m.
    pub initial_position: [f64; 3],
    /// Direction of travel in the ground plane, rad from inertial `x`.
    #[serde(default)]
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl TargetScript {
    pub fn validate(&self) -> Result<(), String> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        let fine = match self.motion {
            TargetMotion::Static => true,
            TargetMotion::ConstantLine { speed } => ok(speed),
            TargetMotion::AcceleratingLine { acceleration, speed_cap } => {
                ok(acceleration) && acceleration > 0.0 && ok(speed_cap)
            }
            TargetMotion::SCurve { speed, lateral_acceleration, lateral_speed_cap } => {
                ok(speed) && ok(lateral_acceleration) && lateral_acceleration > 0.0 && ok(lateral_speed_cap)
            }
        };
        if !fine || !self.heading.is_finite() || self.initial_position.iter().any(|x| !x.is_finite()) {
            return Err(format!("invalid target script {self:?}"));
        }
        Ok(())
    }
}

/// Distance and speed along a line that accelerates from rest at `a` up to `cap`.
fn capped_ramp(a: f64, cap: f64, t: f64) -> (f64, f64) {
    let t_cap = cap / a;
    if t <= t_cap {
        (0.5 * a * t * t, a * t)
    } else {
        (0.5 * cap * t_cap + cap * (t - t_cap), cap)
    }
}

/// Offset and speed of a triangle-wave lateral velocity between `±cap`,
/// starting at zero and rising.
fn triangle(a: f64, cap: f64, t: f64) -> (f64, f64) {
    if cap == 0.0 {
        return (0.0, 0.0);
    }
    let t1 = cap / a;
    if t <= t1 {
        return (0.5 * a * t * t, a * t);
    }
    let y1 = 0.5 * cap * t1;
    let u = t - t1;
    let k = (u / (2.0 * t1)).floor();
    let tau = u - k * 2.0 * t1;
    if (k as i64) % 2 == 0 {
        (y1 + cap * tau - 0.5 * a * tau * tau, cap - a * tau)
    } else {
        (y1 - cap * tau + 0.5 * a * tau * tau, -cap + a * tau)
    }
}

/// Target origin position and velocity at time `t ≥ 0`.
pub fn target_state(script: &TargetScript, t: f64) -> TargetState {
    let t = t.max(0.0);
    let along = Vector3::new(script.heading.cos(), script.heading.sin(), 0.0);
    let left = Vector3::new(-script.heading.sin(), script.heading.cos(), 0.0);
    let (s, v, y, w) = match script.motion {
        TargetMotion::Static => (0.0, 0.0, 0.0, 0.0),
        TargetMotion::ConstantLine { speed } => (speed * t, speed, 0.0, 0.0),
        TargetMotion::AcceleratingLine { acceleration, speed_cap } => {
            let (s, v) = capped_ramp(acceleration, speed_cap, t);
            (s, v, 0.0, 0.0)
        }
        TargetMotion::SCurve { speed, lateral_acceleration, lateral_speed_cap } => {
            let (y, w) = triangle(lateral_acceleration, lateral_speed_cap, t);
            (speed * t, speed, y, w)
        }
    };
    TargetState {
        position: Vector3::from(script.initial_position) + along * s + left * y,
        velocity: along * v + left * w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(motion: TargetMotion) -> TargetScript {
        TargetScript { motion, initial_position: [1.0, 0.0, 0.5], heading: 0.0 }
    }

    #[test]
    fn constant_line_displacement() {
        let s = target_state(&script(TargetMotion::ConstantLine { speed: 0.3 }), 2.0);
        assert!((s.position.x - 1.6).abs() < 1e-12);
        assert_eq!(s.velocity, Vector3::new(0.3, 0.0, 0.0));
    }

    #[test]
    fn ramp_reaches_cap_at_ten_seconds() {
        let sc = script(TargetMotion::AcceleratingLine { acceleration: 0.03, speed_cap: 0.3 });
        assert!((target_state(&sc, 9.999).velocity.x - 0.29997).abs() < 1e-9);
        assert!((target_state(&sc, 10.0).velocity.x - 0.3).abs() < 1e-12);
        assert!((target_state(&sc, 12.0).velocity.x - 0.3).abs() < 1e-12);
        assert!((target_state(&sc, 10.0).position.x - 2.5).abs() < 1e-12);
    }

    #[test]
    fn s_curve_lateral_speed_alternates() {
        let sc = script(TargetMotion::SCurve { speed: 0.1, lateral_acceleration: 0.02, lateral_speed_cap: 0.1 });
        let v = |t: f64| target_state(&sc, t).velocity;
        assert!((v(5.0).y - 0.1).abs() < 1e-12);
        assert!((v(10.0).y).abs() < 1e-12);
        assert!((v(15.0).y + 0.1).abs() < 1e-12);
        assert!((v(25.0).y - 0.1).abs() < 1e-12);
        assert!((v(7.0).x - 0.1).abs() < 1e-12);
        // lateral excursion stays within the triangle-wave bound
        for k in 0..400 {
            let y = target_state(&sc, k as f64 * 0.1).position.y;
            assert!((-1e-12..=0.5 + 1e-12).contains(&y));
        }
    }

    #[test]
    fn positions_integrate_velocities() {
        let scripts = [
            script(TargetMotion::ConstantLine { speed: 0.5 }),
            script(TargetMotion::AcceleratingLine { acceleration: 0.015, speed_cap: 0.3 }),
            TargetScript {
                heading: 0.7,
                ..script(TargetMotion::SCurve { speed: 0.1, lateral_acceleration: 0.02, lateral_speed_cap: 0.1 })
            },
        ];
        for sc in &scripts {
            let mut p = target_state(sc, 0.0).position;
            let h = 1e-3;
            for k in 0..40_000 {
                // trapezoid rule
                let t = k as f64 * h;
                p += (target_state(sc, t).velocity + target_state(sc, t + h).velocity) * (h / 2.0);
            }
            assert!((p - target_state(sc, 40.0).position).norm() < 1e-6);
        }
    }

    #[test]
    fn acceleration_is_bounded() {
        let sc = script(TargetMotion::SCurve { speed: 0.1, lateral_acceleration: 0.02, lateral_speed_cap: 0.1 });
        let h = 1e-3;
        for k in 0..30_000 {
            let t = k as f64 * h;
            let a = (target_state(&sc, t + h).velocity - target_state(&sc, t).velocity) / h;
            assert!(a.norm() <= 0.02 + 1e-9);
        }
    }
}
