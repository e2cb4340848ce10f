//! Online control for single-integrator robots.
//!
//! Each tick runs two small QPs. The reference controller turns the
//! agent's α row into α-relaxed CLF rows and picks the cheapest input that
//! makes progress on the prioritized targets. The security filter then
//! stays as close as possible to that input while honoring the barrier
//! rows for the next co-observation, any pending regroup, and hard
//! collision rows.

mod cbf;
mod clf;
mod controller;
mod qp;

pub use cbf::{
    cbf_always, cbf_conjunction, cbf_eventually, eventually_for_deadline, BarrierForm, BarrierPurpose, CbfEval,
    CbfInstance,
};
pub use clf::{clf_value_grad, ClfKind, ClfSpec};
pub use controller::{
    reference_control, security_filter, split_barrier_rows, FilterOutcome, Obstacle, QpStatus, SoftBarrier,
};
pub use qp::{kkt_residuals, qp_solve, LinearConstraint, QpSolution};

use alloc::format;

use crate::{Error, Matrix, Point2, Result};

/// `ẋ = u` with a speed limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorDynamics {
    pub v_max: f64,
}

impl IntegratorDynamics {
    pub fn new(v_max: f64) -> Result<Self> {
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "v_max",
                reason: format!("must be positive, got {v_max}"),
            });
        }
        Ok(Self { v_max })
    }

    /// Per-axis bound of the input box inscribed in the speed disc.
    pub fn box_limit(&self) -> f64 {
        self.v_max / core::f64::consts::SQRT_2
    }

    /// Explicit Euler step.
    pub fn step(&self, x: Point2, u: Point2, dt: f64) -> Point2 {
        x + u * dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Point2,
    pub team: usize,
    pub agent: usize,
}

/// Class-K gain used in the CLF rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassK {
    /// `k · s`
    Linear(f64),
    /// `k · s / (1 + k·|s| / cap)`: linear near zero, never above `cap`.
    Saturating { k: f64, cap: f64 },
}

impl ClassK {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ClassK::Linear(k) => k * s,
            ClassK::Saturating { k, cap } => k * s / (1.0 + k * s.abs() / cap),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub dynamics: IntegratorDynamics,
    /// Weight of the reference-control objective `uᵀQu`.
    pub q: Matrix,
    pub clf_gain: ClassK,
    /// Linear barrier gain `β`.
    pub cbf_gain: f64,
    /// Relaxation constant `𝓜`.
    pub big_m: f64,
    /// Decay rate of the always-barrier offset.
    pub cbf_decay: f64,
    pub cbf_mu: f64,
    pub cbf_sigma: f64,
    pub r_safe: f64,
    pub dt: f64,
    /// Lower bound on the eventually-barrier offset `a`, as a fraction of
    /// the window length.
    pub eventually_floor: f64,
}

impl ControlConfig {
    pub fn new(v_max: f64) -> Result<Self> {
        Ok(Self {
            dynamics: IntegratorDynamics::new(v_max)?,
            q: Matrix::identity(2),
            clf_gain: ClassK::Linear(1.0),
            cbf_gain: 2.0,
            big_m: 1e3 * v_max,
            cbf_decay: 0.5,
            cbf_mu: 1.0,
            cbf_sigma: 1.0,
            r_safe: 0.15,
            dt: 0.01,
            eventually_floor: 0.1,
        })
    }

    pub fn v_max(&self) -> f64 {
        self.dynamics.v_max
    }

    pub fn validate(&self, timestep_duration: f64) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if self.q.shape() != (2, 2) {
            return bad("q", "must be 2x2".into());
        }
        if self.big_m < 1e3 * self.v_max() {
            return bad("big_m", format!("must be at least 1000 * v_max = {}", 1e3 * self.v_max()));
        }
        if !(self.dt > 0.0) || self.dt > 0.1 * timestep_duration + 1e-12 {
            return bad("dt", format!("must lie in (0, {}]", 0.1 * timestep_duration));
        }
        if !(self.cbf_gain > 0.0) {
            return bad("cbf_gain", "must be positive".into());
        }
        if !(self.r_safe >= 0.0) {
            return bad("r_safe", "must be non-negative".into());
        }
        if !(self.cbf_decay > 0.0 && self.cbf_mu > 0.0) {
            return bad("cbf_decay", "decay and mu must be positive".into());
        }
        if !(self.eventually_floor >= 0.0) {
            return bad("eventually_floor", "must be non-negative".into());
        }
        match self.clf_gain {
            ClassK::Linear(k) if k > 0.0 => Ok(()),
            ClassK::Saturating { k, cap } if k > 0.0 && cap > 0.0 => Ok(()),
            _ => bad("clf_gain", "gain and cap must be positive".into()),
        }
    }
}
