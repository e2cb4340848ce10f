use alloc::string::String;

/// Errors raised by the core kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(&'static str),

    #[error("invalid ellipse: focal sum {two_a} is shorter than the focal distance {focal_distance}")]
    InvalidEllipse { two_a: f64, focal_distance: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("communication graph is disconnected")]
    Disconnected,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("ADMM did not converge after {rounds} rounds (primal {primal:.3e}, dual {dual:.3e})")]
    NonConvergence { rounds: usize, primal: f64, dual: f64 },

    #[error("oracle supports at most 8 agents, got {0}")]
    OracleTooLarge(usize),

    #[error("rejoin is physically impossible: distance {distance} exceeds reach {reach}")]
    Unreachable { distance: f64, reach: f64 },

    #[error("barrier is already violated at activation (h = {h})")]
    InfeasibleAtActivation { h: f64 },

    #[error("quadratic program is infeasible")]
    Infeasible,

    #[error("quadratic program: {0}")]
    QpFailure(&'static str),

    #[error("invalid status transition from {from} to {to}")]
    InvalidTransition { from: &'static str, to: &'static str },

    #[error("message log: {0}")]
    MessageLog(String),
}

pub type Result<T> = core::result::Result<T, Error>;
