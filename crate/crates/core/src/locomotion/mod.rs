//! Trot scheduling, footstep placement, the ground-force MPC, and leg torques.

mod gait;
mod leg_control;
mod mpc;

pub use gait::{raibert_footstep, GaitSchedule};
pub use leg_control::{leg_bias, leg_mass_matrix, leg_torque, FootReference, LegGains, LegMode, LegTorque};
pub use mpc::{
    build_mpc_qp, discrete_dynamics, equilibrium_forces, srb_mpc, srb_mpc_with_fallback, ForceLayout, ForceReference, MpcConfig, MpcInput,
    MpcSolution, MpcStatus, SolutionSlot, SrbModel, SrbState, SrbVector, STATE_DIM,
};
