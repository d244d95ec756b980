//! The simulated robot and its two fidelity tiers.

use nalgebra::{Isometry3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use quadservo_core::kinematics::{
    arm_forward_kinematics, euler_to_rotation, floating_base_bias, floating_base_mass_matrix, leg_inverse_kinematics,
    leg_jacobian_derivative, leg_kinematics, rotation_to_euler, EulerZyx, KinematicModel, Leg, RobotState, LEG_COUNT,
};
use quadservo_core::locomotion::{leg_bias, leg_mass_matrix, GaitSchedule};
use quadservo_core::KinematicsError;

use crate::camera::{render_points, CameraConfig, ImagePoint};
use crate::error::SimError;
use crate::target::{marker_offsets, target_state, TargetScript, TargetState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// Base follows the commanded velocity through a first-order lag, arm
    /// integrates the commanded joint rates, roll and pitch are prescribed.
    Kinematic,
    /// Trunk and arm integrate the floating-base equations under the
    /// stance-foot forces and arm torques.
    Dynamic,
}

/// Prescribed attitude sway of the kinematic tier:
/// `roll = A_r sin(ωt)`, `pitch = A_p sin(2ωt)`, yaw held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwayConfig {
    pub roll_amplitude: f64,
    pub pitch_amplitude: f64,
    /// Hz.
    pub frequency: f64,
}

impl Default for SwayConfig {
    fn default() -> Self {
        Self { roll_amplitude: 0.02, pitch_amplitude: 0.01, frequency: 1.25 }
    }
}

impl SwayConfig {
    pub fn none() -> Self {
        Self { roll_amplitude: 0.0, pitch_amplitude: 0.0, frequency: 0.0 }
    }

    /// `(roll, pitch)` and their rates at `t`.
    fn at(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let w = 2.0 * std::f64::consts::PI * self.frequency;
        (
            [self.roll_amplitude * (w * t).sin(), self.pitch_amplitude * (2.0 * w * t).sin()],
            [self.roll_amplitude * w * (w * t).cos(), 2.0 * w * self.pitch_amplitude * (2.0 * w * t).cos()],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub fidelity: Fidelity,
    /// Integration step, s.
    pub dt: f64,
    /// m/s².
    pub gravity: f64,
    /// Kinematic-tier velocity lag time constant, s. Zero means exact tracking.
    pub lag_time: f64,
    pub sway: SwayConfig,
    pub camera: CameraConfig,
    /// Image noise seed. Set by the run configuration, not read from files.
    #[serde(skip)]
    pub seed: u64,
    /// Contact schedule of the dynamic tier.
    pub gait: GaitSchedule<f64>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            fidelity: Fidelity::Kinematic,
            dt: 1e-3,
            gravity: 9.81,
            lag_time: 0.05,
            sway: SwayConfig::default(),
            camera: CameraConfig::default(),
            seed: 0,
            gait: GaitSchedule::trot(),
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.into()));
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return bad("dt must be in (0, 0.01]");
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return bad("gravity must be finite and non-negative");
        }
        if !(self.lag_time >= 0.0 && self.lag_time.is_finite()) {
            return bad("lag_time must be finite and non-negative");
        }
        let s = &self.sway;
        if ![s.roll_amplitude, s.pitch_amplitude, s.frequency].iter().all(|x| x.is_finite() && *x >= 0.0) {
            return bad("sway parameters must be finite and non-negative");
        }
        if !(self.camera.half_extent > 0.0 && self.camera.noise_amplitude >= 0.0) {
            return bad("camera half_extent must be positive and noise non-negative");
        }
        let g = &self.gait;
        if !(g.period > 0.0 && g.duty >= 0.0 && g.duty <= 1.0) {
            return bad("gait period must be positive and duty in [0, 1]");
        }
        Ok(())
    }
}

/// Complete simulator state, ground truth included.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub time: f64,
    pub steps: u64,
    pub robot: RobotState<f64>,
    /// Foot positions, inertial frame.
    pub feet: [Vector3<f64>; LEG_COUNT],
    pub contacts: [bool; LEG_COUNT],
    pub target: TargetState,
    /// Yaw held by the kinematic tier.
    pub held_yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LegCommand {
    /// Joint torques per leg. Stance legs are massless and transmit
    /// `f = −J⁻ᵀ τ` to the trunk; swing legs integrate their point-mass model.
    Torques([Vector3<f64>; LEG_COUNT]),
    /// Ground reaction forces on stance feet, inertial frame. Swing legs get zero torque.
    Forces([Vector3<f64>; LEG_COUNT]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Actuation {
    Kinematic {
        /// Base velocity command, inertial frame.
        v_b: Vector3<f64>,
        qd_arm: Vector6<f64>,
    },
    Dynamic {
        legs: LegCommand,
        arm_tau: Vector6<f64>,
    },
}

/// What the controller may see: proprioception, the image, and the clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub time: f64,
    pub robot: RobotState<f64>,
    pub image: Vec<ImagePoint>,
}

/// Anything that closes the loop. It only ever receives a [`Measurement`].
pub trait Controller {
    type Error;
    fn control(&mut self, measurement: &Measurement) -> Result<Actuation, Self::Error>;
}

fn kin_err(time: f64) -> impl Fn(KinematicsError) -> SimError {
    move |source| SimError::Kinematics { time, source }
}

fn finite3(v: &Vector3<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Base pose `I T_B`.
pub fn base_pose(robot: &RobotState<f64>) -> Result<Isometry3<f64>, KinematicsError> {
    let r = euler_to_rotation(&robot.orientation)?;
    Ok(Isometry3::from_parts(Translation3::from(robot.p_b), UnitQuaternion::from_rotation_matrix(&r)))
}

/// Standing posture: feet under the hips at ground height, arm at home.
pub fn standing_state(model: &KinematicModel<f64>, position_xy: [f64; 2], yaw: f64) -> Result<RobotState<f64>, KinematicsError> {
    let mut s = RobotState::zeros();
    s.p_b = Vector3::new(position_xy[0], position_xy[1], model.nominal_height);
    s.orientation = EulerZyx::new(yaw, 0.0, 0.0);
    for leg in Leg::ALL {
        let i = leg.index();
        let foot = model.legs.hips[i] + Vector3::new(0.0, leg.side() * model.legs.abduction_offset, -model.nominal_height);
        s.set_q_leg(i, &leg_inverse_kinematics(model, i, &foot)?);
    }
    s.set_q_arm(&model.arm_home);
    Ok(s)
}

fn feet_from_legs(model: &KinematicModel<f64>, robot: &RobotState<f64>) -> Result<[Vector3<f64>; LEG_COUNT], KinematicsError> {
    let pose = base_pose(robot)?;
    let mut feet = [Vector3::zeros(); LEG_COUNT];
    for (i, f) in feet.iter_mut().enumerate() {
        *f = (pose * Point3::from(leg_kinematics(model, i, &robot.q_leg(i))?.foot)).coords;
    }
    Ok(feet)
}

/// Builds the initial plant state. The kinematic tier overwrites roll,
/// pitch and the body rate with the sway at `t = 0`.
pub fn initial_state(
    model: &KinematicModel<f64>,
    config: &PlantConfig,
    script: &TargetScript,
    robot: RobotState<f64>,
) -> Result<PlantState, SimError> {
    config.validate()?;
    script.validate().map_err(SimError::Config)?;
    let mut robot = robot;
    let held_yaw = robot.orientation.yaw;
    let contacts = match config.fidelity {
        Fidelity::Kinematic => {
            apply_sway(&mut robot, &config.sway, held_yaw, 0.0);
            [true; LEG_COUNT]
        }
        Fidelity::Dynamic => config.gait.contacts(0.0),
    };
    let mut feet = feet_from_legs(model, &robot).map_err(kin_err(0.0))?;
    if config.fidelity == Fidelity::Dynamic {
        for leg in 0..LEG_COUNT {
            if contacts[leg] {
                feet[leg].z = 0.0;
            }
        }
    }
    Ok(PlantState { time: 0.0, steps: 0, robot, feet, contacts, target: target_state(script, 0.0), held_yaw })
}

fn apply_sway(robot: &mut RobotState<f64>, sway: &SwayConfig, yaw: f64, t: f64) {
    let ([roll, pitch], [roll_dot, pitch_dot]) = sway.at(t);
    robot.orientation = EulerZyx::new(yaw, pitch, roll);
    robot.omega_b = robot.orientation.rates_to_body_angular_velocity(roll_dot, pitch_dot, 0.0);
}

/// Advances the plant by one step of `config.dt`.
pub fn step_plant(
    model: &KinematicModel<f64>,
    config: &PlantConfig,
    script: &TargetScript,
    state: &PlantState,
    actuation: &Actuation,
) -> Result<PlantState, SimError> {
    let next = match (config.fidelity, actuation) {
        (Fidelity::Kinematic, Actuation::Kinematic { v_b, qd_arm }) => step_kinematic(model, config, state, v_b, qd_arm)?,
        (Fidelity::Dynamic, Actuation::Dynamic { legs, arm_tau }) => step_dynamic(model, config, state, legs, arm_tau)?,
        (Fidelity::Kinematic, _) => return Err(SimError::ActuationTier("kinematic")),
        (Fidelity::Dynamic, _) => return Err(SimError::ActuationTier("dynamic")),
    };
    let mut next = next;
    next.target = target_state(script, next.time);
    if !next.robot.is_finite() || !next.feet.iter().all(finite3) {
        return Err(SimError::NonFinite { time: next.time, what: "robot state" });
    }
    Ok(next)
}

fn step_kinematic(
    model: &KinematicModel<f64>,
    config: &PlantConfig,
    state: &PlantState,
    v_cmd: &Vector3<f64>,
    qd_arm: &Vector6<f64>,
) -> Result<PlantState, SimError> {
    if !finite3(v_cmd) || qd_arm.iter().any(|x| !x.is_finite()) {
        return Err(SimError::NonFinite { time: state.time, what: "kinematic command" });
    }
    let dt = config.dt;
    let steps = state.steps + 1;
    let time = steps as f64 * dt;
    let alpha = if config.lag_time > 0.0 { 1.0 - (-dt / config.lag_time).exp() } else { 1.0 };
    let mut robot = state.robot.clone();
    robot.v_b += (v_cmd - robot.v_b) * alpha;
    robot.p_b += robot.v_b * dt;
    robot.set_qd_arm(qd_arm);
    robot.set_q_arm(&(state.robot.q_arm() + qd_arm * dt));
    apply_sway(&mut robot, &config.sway, state.held_yaw, time);
    let feet = feet_from_legs(model, &robot).map_err(kin_err(time))?;
    Ok(PlantState { time, steps, robot, feet, ..state.clone() })
}

fn step_dynamic(
    model: &KinematicModel<f64>,
    config: &PlantConfig,
    state: &PlantState,
    legs: &LegCommand,
    arm_tau: &Vector6<f64>,
) -> Result<PlantState, SimError> {
    let dt = config.dt;
    let t = state.time;
    let s = &state.robot;
    let r = s.rotation().map_err(kin_err(t))?;

    // stance legs transmit their force straight to the trunk
    let mut wrench = Vector6::zeros();
    for leg in 0..LEG_COUNT {
        if !state.contacts[leg] {
            continue;
        }
        let k = leg_kinematics(model, leg, &s.q_leg(leg)).map_err(kin_err(t))?;
        let f_body = match legs {
            LegCommand::Torques(tau) => -k
                .jacobian
                .transpose()
                .lu()
                .solve(&tau[leg])
                .ok_or(SimError::NonFinite { time: t, what: "stance leg force (singular leg)" })?,
            LegCommand::Forces(f) => r.inverse() * f[leg],
        };
        let n = k.foot.cross(&f_body);
        wrench += Vector6::new(n.x, n.y, n.z, f_body.x, f_body.y, f_body.z);
    }

    let q_arm = s.q_arm();
    let qd_arm = s.qd_arm();
    let nu = s.base_twist_body().map_err(kin_err(t))?;
    let g_body = r.inverse() * Vector3::new(0.0, 0.0, -config.gravity);
    let m = floating_base_mass_matrix(model, &q_arm);
    let n = floating_base_bias(model, &q_arm, &nu, &qd_arm, &g_body);
    let mut rhs = -n;
    rhs.fixed_rows_mut::<6>(0).add_assign(&wrench);
    rhs.fixed_rows_mut::<6>(6).add_assign(arm_tau);
    let acc = m
        .cholesky()
        .ok_or(SimError::NonFinite { time: t, what: "floating-base inertia" })?
        .solve(&rhs);

    let nu_new = nu + acc.fixed_rows::<6>(0) * dt;
    let qd_arm_new = qd_arm + acc.fixed_rows::<6>(6) * dt;
    let omega = Vector3::new(nu_new[0], nu_new[1], nu_new[2]);
    let r_new = r * Rotation3::new(omega * dt);
    let v_world = r_new * Vector3::new(nu_new[3], nu_new[4], nu_new[5]);

    let mut robot = s.clone();
    robot.p_b += v_world * dt;
    robot.v_b = v_world;
    robot.omega_b = omega;
    robot.orientation = rotation_to_euler(&r_new);
    robot.set_qd_arm(&qd_arm_new);
    robot.set_q_arm(&(q_arm + qd_arm_new * dt));

    // swing legs: point mass at the foot, base treated as fixed
    for leg in 0..LEG_COUNT {
        if state.contacts[leg] {
            continue;
        }
        let q = s.q_leg(leg);
        let qd = s.qd_leg(leg);
        let k = leg_kinematics(model, leg, &q).map_err(kin_err(t))?;
        let jdqd = leg_jacobian_derivative(model, leg, &q, &qd).map_err(kin_err(t))?;
        let tau = match legs {
            LegCommand::Torques(tau) => tau[leg],
            LegCommand::Forces(_) => Vector3::zeros(),
        };
        let qdd = leg_mass_matrix(&model.legs, &k.jacobian)
            .lu()
            .solve(&(tau - leg_bias(&model.legs, &k.jacobian, &jdqd, &r, config.gravity)))
            .ok_or(SimError::NonFinite { time: t, what: "swing leg inertia" })?;
        let qd_new = qd + qdd * dt;
        robot.set_qd_leg(leg, &qd_new);
        robot.set_q_leg(leg, &(q + qd_new * dt));
    }

    let steps = state.steps + 1;
    let time = steps as f64 * dt;
    let contacts = config.gait.contacts(time);
    let pose = Isometry3::from_parts(Translation3::from(robot.p_b), UnitQuaternion::from_rotation_matrix(&r_new));
    let mut feet = state.feet;
    for leg in 0..LEG_COUNT {
        if contacts[leg] {
            if !state.contacts[leg] {
                // touchdown: the foot lands where it is, on the ground
                let k = leg_kinematics(model, leg, &robot.q_leg(leg)).map_err(kin_err(time))?;
                feet[leg] = (pose * Point3::from(k.foot)).coords;
                feet[leg].z = 0.0;
            }
            let local = r_new.inverse() * (feet[leg] - robot.p_b);
            let q = leg_inverse_kinematics(model, leg, &local).map_err(kin_err(time))?;
            let k = leg_kinematics(model, leg, &q).map_err(kin_err(time))?;
            let rel = -omega.cross(&local) - r_new.inverse() * v_world;
            let qd = k.jacobian.lu().solve(&rel).unwrap_or_else(Vector3::zeros);
            robot.set_q_leg(leg, &q);
            robot.set_qd_leg(leg, &qd);
        } else {
            let k = leg_kinematics(model, leg, &robot.q_leg(leg)).map_err(kin_err(time))?;
            feet[leg] = (pose * Point3::from(k.foot)).coords;
        }
    }
    Ok(PlantState { time, steps, robot, feet, contacts, ..state.clone() })
}

/// Stateful wrapper owning the model, configuration, script and noise source.
#[derive(Debug, Clone)]
pub struct Plant {
    model: KinematicModel<f64>,
    config: PlantConfig,
    script: TargetScript,
    state: PlantState,
    rng: ChaCha8Rng,
    markers: Vec<Vector3<f64>>,
}

impl Plant {
    pub fn new(
        model: KinematicModel<f64>,
        config: PlantConfig,
        script: TargetScript,
        robot: RobotState<f64>,
    ) -> Result<Self, SimError> {
        model.validate().map_err(kin_err(0.0))?;
        let state = initial_state(&model, &config, &script, robot)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self { model, config, script, state, rng, markers: marker_offsets() })
    }

    pub fn step(&mut self, actuation: &Actuation) -> Result<(), SimError> {
        self.state = step_plant(&self.model, &self.config, &self.script, &self.state, actuation)?;
        Ok(())
    }

    /// Controller-facing view. Draws image noise, so call once per control tick.
    pub fn measure(&mut self) -> Result<Measurement, SimError> {
        let camera = self.camera_pose()?;
        let world: Vec<Vector3<f64>> = self.markers.iter().map(|d| self.state.target.position + d).collect();
        let image = render_points(&camera, &world, &self.config.camera, &mut self.rng);
        Ok(Measurement { time: self.state.time, robot: self.state.robot.clone(), image })
    }

    /// Ground truth. Only the harness and tests look at this.
    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn model(&self) -> &KinematicModel<f64> {
        &self.model
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn script(&self) -> &TargetScript {
        &self.script
    }

    /// `I T_C`.
    pub fn camera_pose(&self) -> Result<Isometry3<f64>, SimError> {
        Ok(base_pose(&self.state.robot).map_err(kin_err(self.state.time))? * self.model.camera_pose())
    }

    /// End-effector origin in the inertial frame.
    pub fn end_effector_position(&self) -> Result<Vector3<f64>, SimError> {
        let pose = base_pose(&self.state.robot).map_err(kin_err(self.state.time))?
            * self.model.arm_mount_pose()
            * arm_forward_kinematics(&self.model.arm, &self.state.robot.q_arm());
        Ok(pose.translation.vector)
    }

    /// Marker positions in the camera frame (their norms are the true depths).
    pub fn marker_points_camera(&self) -> Result<Vec<Vector3<f64>>, SimError> {
        let camera = self.camera_pose()?;
        Ok(self
            .markers
            .iter()
            .map(|d| camera.inverse_transform_point(&Point3::from(self.state.target.position + d)).coords)
            .collect())
    }

    /// Kinetic energy of trunk and arm, `½ xᵀ M x` over `[ω_B; v_B; q̇_arm]`.
    pub fn kinetic_energy(&self) -> Result<f64, SimError> {
        let s = &self.state.robot;
        let m = floating_base_mass_matrix(&self.model, &s.q_arm());
        let nu = s.base_twist_body().map_err(kin_err(self.state.time))?;
        let mut x = nalgebra::SVector::<f64, 12>::zeros();
        x.fixed_rows_mut::<6>(0).copy_from(&nu);
        x.fixed_rows_mut::<6>(6).copy_from(&s.qd_arm());
        Ok(0.5 * x.dot(&(m * x)))
    }
}

use std::ops::AddAssign;
