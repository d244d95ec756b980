//! Built-in scenario catalog.

use nalgebra::Vector3;

use quadservo_core::kinematics::{arm_forward_kinematics, KinematicModel};
use quadservo_sim::{TargetMotion, TargetScript};

use crate::config::{ObserverMode, RunConfig};
use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub id: &'static str,
    pub description: &'static str,
    pub motion: TargetMotion,
    pub duration: f64,
}

pub const CATALOG: [Scenario; 6] = [
    Scenario {
        id: "line-0.3",
        description: "straight line at a constant 0.3 m/s",
        motion: TargetMotion::ConstantLine { speed: 0.3 },
        duration: 30.0,
    },
    Scenario {
        id: "line-0.5",
        description: "straight line at a constant 0.5 m/s",
        motion: TargetMotion::ConstantLine { speed: 0.5 },
        duration: 30.0,
    },
    Scenario {
        id: "ramp-0.015",
        description: "straight line accelerating at 0.015 m/s² up to 0.3 m/s",
        motion: TargetMotion::AcceleratingLine { acceleration: 0.015, speed_cap: 0.3 },
        duration: 35.0,
    },
    Scenario {
        id: "ramp-0.03",
        description: "straight line accelerating at 0.03 m/s² up to 0.3 m/s",
        motion: TargetMotion::AcceleratingLine { acceleration: 0.03, speed_cap: 0.3 },
        duration: 30.0,
    },
    Scenario {
        id: "s-curve",
        description: "0.1 m/s forward, lateral speed ramping at ±0.02 m/s² between ±0.1 m/s",
        motion: TargetMotion::SCurve { speed: 0.1, lateral_acceleration: 0.02, lateral_speed_cap: 0.1 },
        duration: 45.0,
    },
    Scenario {
        id: "static",
        description: "target at rest",
        motion: TargetMotion::Static,
        duration: 20.0,
    },
];

/// Offset of the initial target origin from the end effector at the arm home posture, m.
pub const INITIAL_TARGET_OFFSET: [f64; 3] = [0.3, 0.05, 0.0];

/// End-effector origin for a robot standing at the origin with the arm at home.
pub fn home_end_effector(model: &KinematicModel<f64>) -> Vector3<f64> {
    let base = nalgebra::Isometry3::translation(0.0, 0.0, model.nominal_height);
    (base * model.arm_mount_pose() * arm_forward_kinematics(&model.arm, &model.arm_home)).translation.vector
}

pub fn find(id: &str) -> Result<&'static Scenario, HarnessError> {
    CATALOG.iter().find(|s| s.id == id).ok_or_else(|| HarnessError::UnknownScenario(id.into()))
}

/// Full run configuration for a catalog scenario with default gains.
pub fn scenario_config(id: &str, mode: ObserverMode) -> Result<RunConfig, HarnessError> {
    let s = find(id)?;
    let start = home_end_effector(&KinematicModel::default()) + Vector3::from(INITIAL_TARGET_OFFSET);
    Ok(RunConfig {
        scenario: s.id.into(),
        observer_mode: mode,
        duration: s.duration,
        target: TargetScript { motion: s.motion, initial_position: start.into(), heading: 0.0 },
        ..RunConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_matches_published_scenarios() {
        let ids: Vec<_> = CATALOG.iter().map(|s| s.id).collect();
        assert_eq!(ids, ["line-0.3", "line-0.5", "ramp-0.015", "ramp-0.03", "s-curve", "static"]);
        assert_eq!(find("line-0.3").unwrap().motion, TargetMotion::ConstantLine { speed: 0.3 });
        assert_eq!(find("line-0.5").unwrap().motion, TargetMotion::ConstantLine { speed: 0.5 });
        assert_eq!(
            find("ramp-0.03").unwrap().motion,
            TargetMotion::AcceleratingLine { acceleration: 0.03, speed_cap: 0.3 }
        );
        assert_eq!(
            find("ramp-0.015").unwrap().motion,
            TargetMotion::AcceleratingLine { acceleration: 0.015, speed_cap: 0.3 }
        );
        assert_eq!(
            find("s-curve").unwrap().motion,
            TargetMotion::SCurve { speed: 0.1, lateral_acceleration: 0.02, lateral_speed_cap: 0.1 }
        );
        assert!(matches!(find("nope"), Err(HarnessError::UnknownScenario(_))));
    }

    #[test]
    fn every_scenario_config_validates() {
        for s in &CATALOG {
            for mode in [ObserverMode::Sto, ObserverMode::WoSto] {
                let cfg = scenario_config(s.id, mode).unwrap();
                cfg.validate().unwrap();
                assert_eq!(cfg.observer_mode, mode);
            }
        }
    }
}
