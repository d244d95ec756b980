use thiserror::Error;

use quadservo_core::KinematicsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("non-finite {what} at t = {time:.4} s")]
    NonFinite { time: f64, what: &'static str },
    #[error("invalid plant configuration: {0}")]
    Config(String),
    #[error("actuation does not match the {0} tier")]
    ActuationTier(&'static str),
    #[error("kinematics failed at t = {time:.4} s: {source}")]
    Kinematics { time: f64, source: KinematicsError },
}
