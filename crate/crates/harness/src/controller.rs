//! The visual servoing controller: features, observer, references, MPC and torque laws.

use nalgebra::{Point3, Rotation3, Vector3, Vector6};

use quadservo_core::arm_control::{arm_torque, ArmReference};
use quadservo_core::features::{project_to_sphere, target_centroid, virtual_centroid, visual_error, VirtualFeature, VirtualPointSet};
use quadservo_core::kinematics::{arm_jacobian, composite_com, euler_to_rotation, leg_kinematics, EulerZyx, KinematicModel, Leg, RobotState, LEG_COUNT};
use quadservo_core::locomotion::{
    leg_torque, raibert_footstep, srb_mpc_with_fallback, FootReference, GaitSchedule, LegMode, MpcInput, MpcSolution,
    MpcStatus, SrbModel, SrbState,
};
use quadservo_core::observer::{sto_estimate, sto_init, sto_step, ObserverState, StepStatus};
use quadservo_core::servo::{arm_reference_rate, base_reference_velocity};
use quadservo_sim::{marker_offsets, Actuation, Controller, Fidelity, LegCommand, Measurement};

use crate::config::{ObserverMode, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum ControlError {
    /// No usable marker view; the run must stop.
    TrackingLost { time: f64 },
    Fault { time: f64, message: String },
}

/// Everything the controller computed on one tick, for logging.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickLog {
    pub time: f64,
    pub visible: usize,
    pub frame_used: bool,
    pub h_o: Vector3<f64>,
    pub h_t: Vector3<f64>,
    pub e: Vector3<f64>,
    pub h_hat: Vector3<f64>,
    /// Velocity estimate, camera frame.
    pub y: Vector3<f64>,
    pub observer_rejected: bool,
    pub gate_open: bool,
    pub servo_singular: bool,
    pub v_b_ref: Vector3<f64>,
    pub qd_arm_ref: Vector6<f64>,
    pub q_arm_ref: Vector6<f64>,
    pub p_ref: Vector3<f64>,
    pub contacts: [bool; LEG_COUNT],
    pub grf: [Vector3<f64>; LEG_COUNT],
    pub mpc_solved: bool,
    pub mpc_stale: bool,
    pub mpc_iterations: usize,
    pub mpc_kkt: f64,
    pub mpc_constraint: f64,
    /// Wall-clock seconds spent in the MPC this tick. Not written to CSV.
    pub mpc_solve_seconds: f64,
    pub leg_tau: [Vector3<f64>; LEG_COUNT],
    pub leg_damped: bool,
    pub arm_tau: Vector6<f64>,
    pub arm_saturated: bool,
}

#[derive(Debug, Clone, Copy)]
struct Swing {
    liftoff: Vector3<f64>,
}

pub struct ServoController {
    model: KinematicModel<f64>,
    cfg: RunConfig,
    dt: f64,
    srb: SrbModel<f64>,
    gait: GaitSchedule<f64>,
    points: VirtualPointSet<f64>,
    held_yaw: f64,
    observer: Option<ObserverState<f64>>,
    last_h_o: Option<Vector3<f64>>,
    partial_since: Option<f64>,
    ticks: u64,
    q_arm_ref: Option<Vector6<f64>>,
    p_ref: Option<Vector3<f64>>,
    mpc: Option<MpcSolution<f64>>,
    mpc_age: usize,
    swing: [Option<Swing>; LEG_COUNT],
    log: TickLog,
}

fn clamp_norm(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

impl ServoController {
    pub fn new(model: KinematicModel<f64>, cfg: RunConfig, initial_yaw: f64) -> Self {
        let srb = SrbModel::from_kinematic_model(&model, cfg.plant.gravity, cfg.friction);
        let points = VirtualPointSet::matching_markers(&model, initial_yaw, &marker_offsets());
        Self {
            dt: cfg.control_period(),
            gait: cfg.plant.gait,
            srb,
            points,
            held_yaw: initial_yaw,
            model,
            cfg,
            observer: None,
            last_h_o: None,
            partial_since: None,
            ticks: 0,
            q_arm_ref: None,
            p_ref: None,
            mpc: None,
            mpc_age: 0,
            swing: [None; LEG_COUNT],
            log: TickLog::default(),
        }
    }

    pub fn last_log(&self) -> &TickLog {
        &self.log
    }

    /// Target centroid from a frame where every marker is visible.
    fn measure_centroid(&mut self, m: &Measurement) -> Result<Option<Vector3<f64>>, ControlError> {
        let visible = m.image.iter().filter(|p| p.visible).count();
        self.log.visible = visible;
        if visible == 0 {
            return Err(ControlError::TrackingLost { time: m.time });
        }
        if visible < m.image.len() {
            let since = *self.partial_since.get_or_insert(m.time);
            if m.time - since > self.cfg.metrics.tracking_lost_timeout {
                return Err(ControlError::TrackingLost { time: m.time });
            }
            return Ok(None);
        }
        self.partial_since = None;
        let pts: Vec<_> = m.image.iter().map(|p| project_to_sphere(&p.q)).collect();
        let c = target_centroid(&pts).map_err(|e| ControlError::Fault { time: m.time, message: e.to_string() })?;
        Ok(Some(c.h))
    }

    /// Arm rate reference within the joint bounds: joints at a bound and pushed
    /// outward are dropped and the rest re-solved. `None` when the remaining
    /// joints cannot produce the feature rate.
    fn arm_rate(&self, e: &Vector3<f64>, vf: &VirtualFeature<f64>, q: &Vector6<f64>) -> Option<Vector6<f64>> {
        let limits = &self.cfg.limits;
        let mut j_e = arm_jacobian(&self.model.arm, q);
        let mut locked = [false; 6];
        loop {
            let qd = arm_reference_rate(e, &vf.l, &vf.r_virtual, &vf.j_t, &j_e, &self.cfg.servo.k_a).ok()?;
            let mut changed = false;
            for j in 0..6 {
                let out = (q[j] <= limits.arm_lower[j] && qd[j] < 0.0) || (q[j] >= limits.arm_upper[j] && qd[j] > 0.0);
                if out && !locked[j] {
                    locked[j] = true;
                    j_e.column_mut(j).fill(0.0);
                    changed = true;
                }
            }
            if !changed {
                let peak = qd.amax();
                return Some(if peak > limits.arm_joint_rate { qd * (limits.arm_joint_rate / peak) } else { qd });
            }
        }
    }

    fn fault(time: f64) -> impl Fn(String) -> ControlError {
        move |message| ControlError::Fault { time, message }
    }

    fn dynamic_actuation(
        &mut self,
        m: &Measurement,
        v_ref: Vector3<f64>,
        qd_arm_ref: Vector6<f64>,
    ) -> Result<Actuation, ControlError> {
        let s = &m.robot;
        let fault = Self::fault(m.time);
        let r = s.rotation().map_err(|e| fault(e.to_string()))?;
        let g = self.cfg.plant.gravity;
        let limits = self.cfg.limits;

        // arm: integrate the rate reference into a joint reference
        let q_ref = self.q_arm_ref.get_or_insert(s.q_arm());
        *q_ref += qd_arm_ref * self.dt;
        let arm = arm_torque(
            &self.model,
            &ArmReference { q: *q_ref, qd: qd_arm_ref, qdd: Vector6::zeros() },
            s,
            &self.cfg.arm,
            g,
        );
        if arm.fault {
            return Err(fault("arm dynamics unavailable".into()));
        }
        self.log.q_arm_ref = *q_ref;
        self.log.arm_tau = arm.tau;
        self.log.arm_saturated = arm.saturated;

        // base position reference with a leash to the measured base
        let nominal = self.model.nominal_height;
        let p_ref = self.p_ref.get_or_insert(s.p_b);
        *p_ref += v_ref * self.dt;
        p_ref.z = p_ref.z.clamp(nominal - limits.height_band, nominal + limits.height_band);
        let mut gap = *p_ref - s.p_b;
        gap.z = 0.0;
        if gap.norm() > limits.reference_leash {
            let keep = gap * (limits.reference_leash / gap.norm());
            p_ref.x = s.p_b.x + keep.x;
            p_ref.y = s.p_b.y + keep.y;
        }
        let p_ref = *p_ref;
        self.log.p_ref = p_ref;

        let t = m.time;
        let contacts = self.gait.contacts(t);
        self.log.contacts = contacts;
        let pose = nalgebra::Isometry3::from_parts(
            nalgebra::Translation3::from(s.p_b),
            nalgebra::UnitQuaternion::from_rotation_matrix(&r),
        );
        let mut feet = [Vector3::zeros(); LEG_COUNT];
        let mut kin = Vec::with_capacity(LEG_COUNT);
        for leg in 0..LEG_COUNT {
            let k = leg_kinematics(&self.model, leg, &s.q_leg(leg)).map_err(|e| fault(e.to_string()))?;
            feet[leg] = (pose * Point3::from(k.foot)).coords;
            kin.push(k);
        }

        // footholds for legs in swing, placed at touchdown
        let stance_time = self.gait.stance_time();
        let mut landing = feet;
        let mut progress = [0.0; LEG_COUNT];
        for leg in 0..LEG_COUNT {
            match self.gait.swing_progress(t, leg) {
                None => self.swing[leg] = None,
                Some(p) => {
                    progress[leg] = p;
                    let sw = *self.swing[leg].get_or_insert(Swing { liftoff: feet[leg] });
                    let remaining = (1.0 - p) * self.gait.swing_time();
                    let side = Leg::ALL[leg].side();
                    let hip_b = self.model.legs.hips[leg] + Vector3::new(0.0, side * self.model.legs.abduction_offset, 0.0);
                    let hip = s.p_b + r * hip_b + v_ref * remaining;
                    landing[leg] =
                        raibert_footstep(&hip, &s.v_b, &v_ref, stance_time, self.cfg.swing.k_step, 0.0);
                    let _ = sw;
                }
            }
        }

        // MPC at its own rate
        if self.mpc.is_none() || self.ticks % self.cfg.ticks_per_mpc() as u64 == 0 {
            let n = self.cfg.mpc.horizon;
            let dt_mpc = self.cfg.mpc.dt;
            // the body is tracked at its center of mass, which the arm moves around
            let com = r * composite_com(&self.model, &s.q_arm());
            let level = EulerZyx::new(self.held_yaw, 0.0, 0.0);
            let com_ref = euler_to_rotation(&level).map_err(|e| fault(e.to_string()))? * composite_com(&self.model, &self.log.q_arm_ref);
            let omega = r * s.omega_b;
            let state = SrbState { orientation: s.orientation, position: s.p_b + com, omega, velocity: s.v_b + omega.cross(&com) };
            let v_plane = Vector3::new(v_ref.x, v_ref.y, 0.0);
            let reference = (1..=n)
                .map(|k| SrbState {
                    orientation: level,
                    position: p_ref + com_ref + v_plane * (k as f64 * dt_mpc),
                    omega: Vector3::zeros(),
                    velocity: v_plane,
                })
                .collect();
            let horizon_contacts = self.gait.horizon(t, n, dt_mpc);
            let horizon_feet = (0..n)
                .map(|k| {
                    let c = s.p_b + com + v_plane * (k as f64 * dt_mpc);
                    std::array::from_fn(|leg| if contacts[leg] { feet[leg] - c } else { landing[leg] - c })
                })
                .collect();
            let input = MpcInput { state, reference, contacts: horizon_contacts, feet: horizon_feet };
            let started = std::time::Instant::now();
            let sol = srb_mpc_with_fallback(&self.srb, &self.cfg.mpc, &input, self.mpc.as_ref())
                .map_err(|e| fault(e.to_string()))?;
            self.log.mpc_solve_seconds = started.elapsed().as_secs_f64();
            self.log.mpc_solved = true;
            self.log.mpc_stale = sol.status == MpcStatus::Stale;
            self.log.mpc_iterations = sol.iterations;
            self.log.mpc_kkt = sol.kkt_residual;
            self.log.mpc_constraint = sol.constraint_residual;
            self.mpc = Some(sol);
            self.mpc_age = 0;
        } else {
            self.mpc_age += 1;
        }
        let grf = self.mpc.as_ref().map(|s| s.first()).unwrap_or([Vector3::zeros(); LEG_COUNT]);
        self.log.grf = grf;

        // leg torques
        let mut tau = [Vector3::zeros(); LEG_COUNT];
        let mut damped = false;
        let swing_time = self.gait.swing_time();
        for leg in 0..LEG_COUNT {
            let q = s.q_leg(leg);
            let qd = s.qd_leg(leg);
            let out = if contacts[leg] {
                let reference = FootReference {
                    position: kin[leg].foot,
                    velocity: kin[leg].jacobian * qd,
                    acceleration: Vector3::zeros(),
                };
                leg_torque(&self.model, leg, LegMode::Stance, &reference, &q, &qd, &r, &(-grf[leg]), &self.cfg.legs, g)
            } else {
                let start = self.swing[leg].map(|w| w.liftoff).unwrap_or(feet[leg]);
                let goal = landing[leg];
                let (p, v, a) = swing_profile(&start, &goal, self.cfg.swing.height, progress[leg], swing_time);
                let rel = r.inverse() * (p - s.p_b);
                let reference = FootReference {
                    position: rel,
                    velocity: r.inverse() * (v - s.v_b) - s.omega_b.cross(&rel),
                    acceleration: r.inverse() * a,
                };
                leg_torque(&self.model, leg, LegMode::Swing, &reference, &q, &qd, &r, &Vector3::zeros(), &self.cfg.legs, g)
            }
            .map_err(|e| fault(e.to_string()))?;
            tau[leg] = out.tau;
            damped |= out.damped;
        }
        self.log.leg_tau = tau;
        self.log.leg_damped = damped;
        Ok(Actuation::Dynamic { legs: LegCommand::Torques(tau), arm_tau: arm.tau })
    }
}

/// Foot position, velocity and acceleration along a swing from `start` to
/// `goal` at progress `s ∈ [0, 1)`: smoothstep in the plane plus a `sin²` lift.
pub fn swing_profile(
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    height: f64,
    s: f64,
    duration: f64,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let d = goal - start;
    let blend = 3.0 * s * s - 2.0 * s.powi(3);
    let blend_d = (6.0 * s - 6.0 * s * s) / duration;
    let blend_dd = (6.0 - 12.0 * s) / (duration * duration);
    let pi = std::f64::consts::PI;
    let lift = height * (pi * s).sin().powi(2);
    let lift_d = height * pi * (2.0 * pi * s).sin() / duration;
    let lift_dd = 2.0 * height * pi * pi * (2.0 * pi * s).cos() / (duration * duration);
    (
        start + d * blend + Vector3::z() * lift,
        d * blend_d + Vector3::z() * lift_d,
        d * blend_dd + Vector3::z() * lift_dd,
    )
}

impl Controller for ServoController {
    type Error = ControlError;

    fn control(&mut self, m: &Measurement) -> Result<Actuation, ControlError> {
        let prev_log = std::mem::take(&mut self.log);
        self.log.time = m.time;
        let fault = Self::fault(m.time);
        let s: &RobotState<f64> = &m.robot;
        let r_ib = s.rotation().map_err(|e| fault(e.to_string()))?;
        let r_bc = self.model.camera_rotation;
        let r_ic: Rotation3<f64> = r_ib * r_bc;
        let t_bc = self.model.camera_translation;
        let omega_c = r_bc.inverse() * s.omega_b;
        let v_c = r_ic.inverse() * (s.v_b + r_ib * s.omega_b.cross(&t_bc));

        let h_o = self.measure_centroid(m)?;
        self.log.frame_used = h_o.is_some();
        let h_o = match h_o.or(self.last_h_o) {
            Some(h) => h,
            None => return Err(ControlError::TrackingLost { time: m.time }),
        };
        if self.log.frame_used {
            self.last_h_o = Some(h_o);
        }

        let vf = virtual_centroid(&self.model, &self.points, &s.q_arm(), &s.orientation)
            .map_err(|e| fault(e.to_string()))?;
        let e = visual_error(&h_o, &vf.h);
        self.log.h_o = h_o;
        self.log.h_t = vf.h;
        self.log.e = e;

        // the observer runs in both modes; only the STO mode feeds it forward
        let obs = match self.observer {
            None => sto_init(&h_o),
            Some(state) if self.log.frame_used => {
                let (next, status) = sto_step(&state, &h_o, &omega_c, &v_c, &vf.l, &self.cfg.observer, self.dt);
                self.log.observer_rejected = status == StepStatus::Rejected;
                next
            }
            Some(state) => state,
        };
        self.observer = Some(obs);
        let y = sto_estimate(&obs);
        self.log.h_hat = obs.h_hat;
        self.log.y = y;
        let feedforward = match self.cfg.observer_mode {
            ObserverMode::Sto => y,
            ObserverMode::WoSto => Vector3::zeros(),
        };

        let raw = base_reference_velocity(&e, &feedforward, &s.omega_b, &r_ic, &r_ib, &t_bc, &self.cfg.servo);
        let horizontal = clamp_norm(Vector3::new(raw.x, raw.y, 0.0), self.cfg.limits.base_speed);
        let limits = self.cfg.limits;
        let mut vertical = raw.z.clamp(-limits.base_vertical_speed, limits.base_vertical_speed);
        let dz = s.p_b.z - self.model.nominal_height;
        if (dz >= limits.height_band && vertical > 0.0) || (dz <= -limits.height_band && vertical < 0.0) {
            vertical = 0.0;
        }
        let v_ref = Vector3::new(horizontal.x, horizontal.y, vertical);
        self.log.v_b_ref = v_ref;

        let gate = self.cfg.arm_gate.is_open(&h_o, &vf.h);
        self.log.gate_open = gate;
        let qd_arm_ref = if gate {
            match self.arm_rate(&e, &vf, &s.q_arm()) {
                Some(q) => q,
                None => {
                    self.log.servo_singular = true;
                    Vector6::zeros()
                }
            }
        } else {
            Vector6::zeros()
        };
        self.log.qd_arm_ref = qd_arm_ref;

        let out = match self.cfg.plant.fidelity {
            Fidelity::Kinematic => {
                self.log.q_arm_ref = s.q_arm();
                self.log.p_ref = s.p_b;
                Ok(Actuation::Kinematic { v_b: v_ref, qd_arm: qd_arm_ref })
            }
            Fidelity::Dynamic => self.dynamic_actuation(m, v_ref, qd_arm_ref),
        };
        self.ticks += 1;
        if out.is_err() {
            self.log = TickLog { time: m.time, ..prev_log };
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swing_profile_endpoints_and_derivatives() {
        let a = Vector3::new(0.1, 0.2, 0.0);
        let b = Vector3::new(0.3, 0.1, 0.0);
        let (p0, v0, _) = swing_profile(&a, &b, 0.06, 0.0, 0.2);
        assert!((p0 - a).norm() < 1e-15 && v0.norm() < 1e-15);
        let (p1, v1, _) = swing_profile(&a, &b, 0.06, 1.0, 0.2);
        assert!((p1 - b).norm() < 1e-12 && v1.norm() < 1e-12);
        let (pm, _, _) = swing_profile(&a, &b, 0.06, 0.5, 0.2);
        assert!((pm.z - 0.06).abs() < 1e-12);
        // central differences in time
        let h = 1e-6;
        for s in [0.1, 0.37, 0.8] {
            let dur = 0.2;
            let at = |s: f64| swing_profile(&a, &b, 0.06, s, dur);
            let v_fd = (at(s + h / dur).0 - at(s - h / dur).0) / (2.0 * h);
            let a_fd = (at(s + h / dur).1 - at(s - h / dur).1) / (2.0 * h);
            assert!((v_fd - at(s).1).norm() < 1e-6);
            assert!((a_fd - at(s).2).norm() < 1e-4);
        }
    }
}
