use alloc::vec;
use alloc::vec::Vec;

use super::cbf::{BarrierPurpose, CbfInstance};
use super::clf::{clf_value_grad, ClfKind, ClfSpec};
use super::qp::{qp_solve, LinearConstraint};
use super::ControlConfig;
use crate::assignment::{TaskId, TaskLabel, TaskSet};
use crate::{Error, Matrix, Point2, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// Solved after dropping every α-relaxed row.
    Fallback,
    /// No feasible input; the robot holds still.
    Zero,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Fallback => "fallback",
            QpStatus::Zero => "zero",
        }
    }
}

/// Barrier row relaxed by `(1 − weight) · 𝓜`.
#[derive(Debug, Clone, Copy)]
pub struct SoftBarrier<'a> {
    pub barrier: &'a CbfInstance,
    pub weight: f64,
}

/// Static obstacle kept out of via a clearance barrier on its enclosing
/// circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: Point2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub u: Point2,
    pub status: QpStatus,
    /// Smallest barrier value among the soft rows, `+∞` if there are none.
    pub min_h: f64,
    pub active_barriers: usize,
}

fn box_rows(limit: f64) -> [LinearConstraint; 4] {
    [
        LinearConstraint::new(vec![1.0, 0.0], limit),
        LinearConstraint::new(vec![-1.0, 0.0], limit),
        LinearConstraint::new(vec![0.0, 1.0], limit),
        LinearConstraint::new(vec![0.0, -1.0], limit),
    ]
}

fn to_point(u: &[f64]) -> Point2 {
    Point2::new(u[0], u[1])
}

/// CLF rows `∇Vᵀu + γ(V) ≤ relax · 𝓜` for this agent's α row.
fn clf_rows(x: Point2, alpha_row: &[f64], tasks: &TaskSet, config: &ControlConfig) -> Result<Vec<LinearConstraint>> {
    let labels = tasks.labels();
    if labels.len() != alpha_row.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "alpha row has {} entries for {} tasks",
            alpha_row.len(),
            labels.len()
        )));
    }
    let mut trajectory_weight = 0.0;
    let mut rows = Vec::new();
    let mut push = |spec: ClfSpec, weight: f64| {
        let (v, grad) = clf_value_grad(x, &spec);
        let relax = (1.0 - weight).max(0.0) * config.big_m;
        rows.push(LinearConstraint::new(vec![grad.x, grad.y], relax - config.clf_gain.eval(v)));
    };
    for (label, &a) in labels.iter().zip(alpha_row) {
        match *label {
            TaskLabel::Trajectory | TaskLabel::Secondary(_) => trajectory_weight += a,
            TaskLabel::Online(id) => {
                let location = tasks
                    .online
                    .iter()
                    .find(|t| t.id == id)
                    .map(|t| t.location)
                    .expect("labels come from the task set");
                push(ClfSpec { target: location, kind: ClfKind::OnlineTask(id) }, a);
            }
        }
    }
    push(
        ClfSpec { target: tasks.trajectory, kind: ClfKind::TrajectoryWaypoint },
        trajectory_weight,
    );
    Ok(rows)
}

/// Cheapest input under the α-relaxed CLF rows and the speed box. The
/// trajectory row is relaxed by `1 − α_P − Σ α_P′`, so secondary agents
/// keep following the trajectory.
pub fn reference_control(
    x: Point2,
    alpha_row: &[f64],
    tasks: &TaskSet,
    config: &ControlConfig,
) -> Result<(Point2, QpStatus)> {
    let mut rows = clf_rows(x, alpha_row, tasks, config)?;
    rows.extend(box_rows(config.dynamics.box_limit()));
    let h = config.q.scale(2.0);
    match qp_solve(&h, &[0.0, 0.0], &rows) {
        Ok(sol) => Ok((to_point(&sol.u), QpStatus::Optimal)),
        Err(Error::Infeasible) | Err(Error::QpFailure(_)) => Ok((Point2::new(0.0, 0.0), QpStatus::Zero)),
        Err(e) => Err(e),
    }
}

/// Rows for the filter from the agent's active barriers: the next
/// co-observation is weighted by `α_P`; each regroup barrier appears twice,
/// once weighted by its task's α and once by `α_P`.
pub fn split_barrier_rows<'a>(
    barriers: &'a [CbfInstance],
    alpha_p: f64,
    alpha_of: impl Fn(TaskId) -> f64,
) -> Vec<SoftBarrier<'a>> {
    let mut rows = Vec::new();
    for b in barriers {
        match b.purpose {
            BarrierPurpose::CoObservation => rows.push(SoftBarrier { barrier: b, weight: alpha_p }),
            BarrierPurpose::Regroup(task) => {
                rows.push(SoftBarrier { barrier: b, weight: alpha_of(task) });
                rows.push(SoftBarrier { barrier: b, weight: alpha_p });
            }
            BarrierPurpose::Collision => {}
        }
    }
    rows
}

/// Closest input to `u_ref` satisfying
/// `∇hᵀu + ∂h/∂t + βh ≥ −(1 − weight)𝓜` for every active soft row, hard
/// clearance rows for neighbors (each robot takes half of the pairwise
/// budget) and obstacles, and the speed box.
pub fn security_filter(
    x: Point2,
    t: f64,
    u_ref: Point2,
    soft: &[SoftBarrier<'_>],
    neighbor_positions: &[Point2],
    obstacles: &[Obstacle],
    config: &ControlConfig,
) -> Result<FilterOutcome> {
    let beta = config.cbf_gain;
    let mut relaxed = Vec::new();
    let mut min_h = f64::INFINITY;
    for row in soft.iter().filter(|r| r.barrier.is_active(t)) {
        let e = row.barrier.eval(x, t);
        min_h = min_h.min(e.h);
        let relax = (1.0 - row.weight).max(0.0) * config.big_m;
        relaxed.push(LinearConstraint::new(vec![-e.grad.x, -e.grad.y], e.dh_dt + beta * e.h + relax));
    }
    let active_barriers = relaxed.len();

    let mut hard: Vec<LinearConstraint> = box_rows(config.dynamics.box_limit()).into();
    for &n in neighbor_positions {
        let e = CbfInstance::clearance(n, config.r_safe).eval(x, t);
        hard.push(LinearConstraint::new(vec![-e.grad.x, -e.grad.y], 0.5 * beta * e.h));
    }
    for o in obstacles {
        let e = CbfInstance::clearance(o.center, o.radius).eval(x, t);
        hard.push(LinearConstraint::new(vec![-e.grad.x, -e.grad.y], beta * e.h));
    }

    let h = Matrix::identity(2).scale(2.0);
    let f = [-2.0 * u_ref.x, -2.0 * u_ref.y];
    let mut all = relaxed;
    all.extend(hard.iter().cloned());
    let outcome = |u: Point2, status| FilterOutcome { u, status, min_h, active_barriers };
    match qp_solve(&h, &f, &all) {
        Ok(sol) => return Ok(outcome(to_point(&sol.u), QpStatus::Optimal)),
        Err(Error::Infeasible) | Err(Error::QpFailure(_)) => {}
        Err(e) => return Err(e),
    }
    match qp_solve(&h, &f, &hard) {
        Ok(sol) => Ok(outcome(to_point(&sol.u), QpStatus::Fallback)),
        Err(Error::Infeasible) | Err(Error::QpFailure(_)) => Ok(outcome(Point2::new(0.0, 0.0), QpStatus::Zero)),
        Err(e) => Err(e),
    }
}
