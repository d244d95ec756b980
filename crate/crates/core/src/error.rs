use thiserror::Error;

/// Failures raised by the geometric and dynamic model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("pitch {pitch} rad is within the gimbal-lock margin of ±π/2")]
    SingularPitch { pitch: f64 },
    #[error("model parameter error: {0}")]
    ModelParameter(String),
    #[error("leg index {0} out of range 0..4")]
    LegIndex(usize),
    #[error("foot target unreachable for leg {leg}")]
    Unreachable { leg: usize },
}

/// Failures raised while building visual features.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("need at least 2 feature points, got {0}")]
    InsufficientFeatures(usize),
    #[error("feature point {index} has degenerate range {range}")]
    DegenerateRange { index: usize, range: f64 },
    #[error("feature point {index} is behind the camera or out of view")]
    TrackingLost { index: usize },
}

/// Failures raised by the reference generator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServoError {
    #[error("feature-space arm map is near singular (σ_min/σ_max = {ratio:e})")]
    NearSingular { ratio: f64 },
}

/// Failures raised by the quadratic program solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("problem is infeasible (constraint {constraint} cannot be satisfied)")]
    Infeasible { constraint: usize },
    #[error("iteration cap {0} reached")]
    MaxIterations(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Failures raised by the locomotion MPC.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpcError {
    #[error("no stance leg anywhere in the horizon")]
    NoStance,
    #[error("QP failed: {0}")]
    Qp(#[from] QpError),
}
