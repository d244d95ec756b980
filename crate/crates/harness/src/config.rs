//! Run configuration: one TOML document, strict keys, versioned schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use quadservo_core::arm_control::ArmGains;
use quadservo_core::kinematics::KinematicModel;
use quadservo_core::locomotion::{LegGains, MpcConfig};
use quadservo_core::observer::ObserverGains;
use quadservo_core::servo::{ArmGate, ServoGains};
use quadservo_sim::{Fidelity, PlantConfig, TargetMotion, TargetScript};

use crate::error::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObserverMode {
    /// Target velocity estimate fed forward into the base reference.
    #[default]
    Sto,
    /// No feedforward; the observer still runs for logging only.
    WoSto,
}

impl ObserverMode {
    pub fn label(self) -> &'static str {
        match self {
            ObserverMode::Sto => "sto",
            ObserverMode::WoSto => "wo_sto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotPlacement {
    /// Base `x, y` in the inertial frame, m. Height is the nominal standing height.
    pub position: [f64; 2],
    pub yaw: f64,
}

impl Default for RobotPlacement {
    fn default() -> Self {
        Self { position: [0.0, 0.0], yaw: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub control_hz: f64,
    pub mpc_hz: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self { control_hz: 400.0, mpc_hz: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwingConfig {
    /// Apex height of the swing foot above the straight line, m.
    pub height: f64,
    /// Raibert velocity-error gain, s.
    pub k_step: f64,
}

impl Default for SwingConfig {
    fn default() -> Self {
        Self { height: 0.06, k_step: 0.03 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    /// Cap on the horizontal base reference speed, m/s.
    pub base_speed: f64,
    /// Cap on the vertical base reference speed, m/s.
    pub base_vertical_speed: f64,
    /// Allowed deviation of the base height from nominal, m.
    pub height_band: f64,
    /// Max horizontal gap between the integrated base reference and the base (dynamic tier), m.
    pub reference_leash: f64,
    /// Cap on the largest arm joint rate reference, rad/s. The whole vector is scaled.
    pub arm_joint_rate: f64,
    /// Arm joint range for the rate reference, rad. A joint at a bound is dropped from the solve.
    pub arm_lower: [f64; 6],
    pub arm_upper: [f64; 6],
}

impl Default for Limits {
    fn default() -> Self {
        Self { base_speed: 1.0, base_vertical_speed: 0.3, height_band: 0.05, reference_leash: 0.1,
            arm_joint_rate: 2.0,
            arm_lower: [-2.6, -1.6, 0.25, -2.6, -1.6, -2.6],
            arm_upper: [2.6, 1.6, 2.6, 2.6, 1.6, 2.6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Tracking error threshold for convergence, m.
    pub convergence_threshold: f64,
    /// How long the error must stay below the threshold, s.
    pub convergence_hold: f64,
    /// Start of the steady-state window, s.
    pub steady_after: f64,
    /// Velocity estimate tolerance for observer convergence, m/s.
    pub observer_tolerance: f64,
    /// Partial marker visibility tolerated before declaring tracking lost, s.
    pub tracking_lost_timeout: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            convergence_threshold: 0.05,
            convergence_hold: 2.0,
            steady_after: 15.0,
            observer_tolerance: 0.02,
            tracking_lost_timeout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: String,
    pub observer_mode: ObserverMode,
    /// Simulated seconds.
    pub duration: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub target: TargetScript,
    pub robot: RobotPlacement,
    /// Geometry and inertia of the robot.
    pub model: KinematicModel<f64>,
    pub plant: PlantConfig,
    pub rates: Rates,
    pub observer: ObserverGains<f64>,
    pub servo: ServoGains<f64>,
    pub arm_gate: ArmGate<f64>,
    pub arm: ArmGains<f64>,
    pub legs: LegGains<f64>,
    pub swing: SwingConfig,
    pub mpc: MpcConfig<f64>,
    /// Friction coefficient assumed by the MPC.
    pub friction: f64,
    pub limits: Limits,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: "custom".into(),
            observer_mode: ObserverMode::Sto,
            duration: 30.0,
            seed: 1,
            output_dir: None,
            target: TargetScript { motion: TargetMotion::Static, initial_position: [1.0, 0.0, 0.27], heading: 0.0 },
            robot: RobotPlacement::default(),
            model: KinematicModel::default(),
            plant: PlantConfig { dt: 5e-4, ..PlantConfig::default() },
            rates: Rates::default(),
            observer: ObserverGains::default(),
            servo: ServoGains::default(),
            arm_gate: ArmGate::default(),
            arm: ArmGains::default(),
            legs: LegGains::default(),
            swing: SwingConfig::default(),
            mpc: MpcConfig::default(),
            friction: 0.6,
            limits: Limits::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

fn ratio_is_integer(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    if n >= 1.0 && (r - n).abs() < 1e-6 {
        Some(n as usize)
    } else {
        None
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| HarnessError::Parse { path: path.into(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    /// Plant steps per control tick.
    pub fn steps_per_tick(&self) -> usize {
        ratio_is_integer(1.0 / self.rates.control_hz, self.plant.dt).unwrap_or(1)
    }

    /// Control ticks per MPC solve.
    pub fn ticks_per_mpc(&self) -> usize {
        ratio_is_integer(self.rates.control_hz, self.rates.mpc_hz).unwrap_or(1)
    }

    pub fn control_period(&self) -> f64 {
        self.steps_per_tick() as f64 * self.plant.dt
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive".into());
        }
        self.model.validate().map_err(|e| HarnessError::Config(format!("model: {e}")))?;
        self.plant.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.target.validate().map_err(HarnessError::Config)?;
        if !(self.rates.control_hz > 0.0 && self.rates.mpc_hz > 0.0) {
            return bad("rates must be positive".into());
        }
        if ratio_is_integer(1.0 / self.rates.control_hz, self.plant.dt).is_none() {
            return bad(format!("control period {} s is not a multiple of plant dt {} s", 1.0 / self.rates.control_hz, self.plant.dt));
        }
        if self.plant.fidelity == Fidelity::Dynamic && ratio_is_integer(self.rates.control_hz, self.rates.mpc_hz).is_none() {
            return bad("control rate must be a multiple of the MPC rate".into());
        }
        if !self.observer.is_valid() {
            return bad("observer gains must be positive with 0 < p ≤ 0.5".into());
        }
        if !self.servo.is_valid() {
            return bad("servo gains must be positive".into());
        }
        if !self.arm.is_valid() {
            return bad("arm gains and torque limit must be positive".into());
        }
        if !(self.arm_gate.cone_half_angle > 0.0 && self.arm_gate.norm_band > 0.0) {
            return bad("arm gate bounds must be positive".into());
        }
        if self.mpc.horizon == 0 || !(self.mpc.dt > 0.0) || !(self.mpc.r > 0.0) || self.mpc.q.iter().any(|q| *q < 0.0) {
            return bad("mpc horizon, dt and r must be positive and q non-negative".into());
        }
        if !(self.friction > 0.0) {
            return bad("friction must be positive".into());
        }
        let l = &self.limits;
        if ![l.base_speed, l.base_vertical_speed, l.height_band, l.reference_leash, l.arm_joint_rate].iter().all(|x| *x > 0.0) {
            return bad("limits must be positive".into());
        }
        if l.arm_lower.iter().zip(&l.arm_upper).any(|(lo, hi)| !(lo < hi)) {
            return bad("arm joint bounds must satisfy lower < upper".into());
        }
        let m = &self.metrics;
        if ![m.convergence_threshold, m.convergence_hold, m.observer_tolerance, m.tracking_lost_timeout].iter().all(|x| *x > 0.0)
            || m.steady_after < 0.0
        {
            return bad("metric thresholds must be positive".into());
        }
        Ok(())
    }
}
