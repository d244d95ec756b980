//! Deterministic plant for the quadruped visual servoing stack.
//!
//! Two fidelity tiers share one interface. The kinematic tier lets the
//! observer and servo be judged without locomotion in the way; the dynamic
//! tier closes the loop through ground reaction forces and arm torques.
//! The controller sees a [`Measurement`] and nothing else.

pub mod camera;
pub mod error;
pub mod plant;
pub mod target;

pub use camera::{render_points, CameraConfig, ImagePoint, MIN_DEPTH};
pub use error::SimError;
pub use plant::{
    base_pose, initial_state, standing_state, step_plant, Actuation, Controller, Fidelity, LegCommand, Measurement, Plant,
    PlantConfig, PlantState, SwayConfig,
};
pub use target::{marker_offsets, target_state, TargetMotion, TargetScript, TargetState, MARKER_OFFSETS};
