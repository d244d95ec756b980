//! Closed-loop runs: controller and plant stepped together, ground truth logged alongside.

use nalgebra::Vector3;

use quadservo_sim::{standing_state, Controller, Plant, SimError};

use crate::config::RunConfig;
use crate::controller::{ControlError, ServoController, TickLog};
use crate::error::HarnessError;
use crate::metrics::{compute_metrics, RunMetrics};

/// One control tick: what the controller computed plus the ground truth at that instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub log: TickLog,
    pub end_effector: Vector3<f64>,
    pub target_position: Vector3<f64>,
    pub target_velocity: Vector3<f64>,
    /// True target velocity in the camera frame, comparable with the estimate `y`.
    pub target_velocity_camera: Vector3<f64>,
    pub base_position: Vector3<f64>,
    pub base_velocity: Vector3<f64>,
}

impl TraceRow {
    pub fn time(&self) -> f64 {
        self.log.time
    }

    pub fn tracking_error(&self) -> f64 {
        (self.end_effector - self.target_position).norm()
    }

    pub fn observer_error(&self) -> f64 {
        (self.log.y - self.target_velocity_camera).norm()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub metrics: RunMetrics,
    pub trace: Vec<TraceRow>,
    /// Wall-clock seconds for the whole run. Reported, never written to CSV.
    pub wall_clock: f64,
}

fn truth(plant: &Plant, log: TickLog) -> Result<TraceRow, SimError> {
    let s = plant.state();
    let r_ic = plant.camera_pose()?.rotation;
    Ok(TraceRow {
        log,
        end_effector: plant.end_effector_position()?,
        target_position: s.target.position,
        target_velocity: s.target.velocity,
        target_velocity_camera: r_ic.inverse() * s.target.velocity,
        base_position: s.robot.p_b,
        base_velocity: s.robot.v_b,
    })
}

/// Runs one configuration to completion or until tracking is lost.
pub fn run_scenario(config: &RunConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let started = std::time::Instant::now();
    let model = config.model.clone();
    let robot = standing_state(&model, config.robot.position, config.robot.yaw)
        .map_err(|source| SimError::Kinematics { time: 0.0, source })?;
    let plant_config = quadservo_sim::PlantConfig { seed: config.seed, ..config.plant };
    let mut plant = Plant::new(model.clone(), plant_config, config.target, robot)?;
    let mut controller = ServoController::new(model, config.clone(), config.robot.yaw);

    let steps = config.steps_per_tick();
    let ticks = (config.duration / config.control_period()).round() as usize;
    let mut trace = Vec::with_capacity(ticks);
    let mut lost_at = None;
    for _ in 0..ticks {
        let m = plant.measure()?;
        let actuation = match controller.control(&m) {
            Ok(a) => a,
            Err(ControlError::TrackingLost { time }) => {
                lost_at = Some(time);
                break;
            }
            Err(ControlError::Fault { time, message }) => return Err(HarnessError::Controller { time, message }),
        };
        trace.push(truth(&plant, controller.last_log().clone())?);
        for _ in 0..steps {
            plant.step(&actuation)?;
        }
    }
    let metrics = compute_metrics(config, &trace, lost_at);
    Ok(RunOutput { config: config.clone(), metrics, trace, wall_clock: started.elapsed().as_secs_f64() })
}
