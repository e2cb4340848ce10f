//! Time-varying barrier functions for the distance predicates
//! `d(x, q) ≤ r` under the eventually / always operators, their
//! conjunction, and time-invariant clearance barriers.
//!
//! Barrier time is measured from the activation instant `origin`, so a
//! window `[a, b]` is relative to when the requirement was set up.

use alloc::boxed::Box;
use alloc::format;

use crate::assignment::TaskId;
use crate::num;
use crate::{Error, Point2, Result};

const GRAD_GUARD: f64 = 1e-9;
const ACTIVATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbfEval {
    pub h: f64,
    /// `∂h/∂x`.
    pub grad: Point2,
    /// `∂h/∂t`.
    pub dh_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierPurpose {
    /// Next scheduled co-observation with another team.
    CoObservation,
    /// Regroup at the end of a deviation for an online task.
    Regroup(TaskId),
    Collision,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BarrierForm {
    /// `a − (a/b)τ + (r − d(x, q)) / v_max`
    Eventually { q: Point2, r: f64, a: f64, b: f64, v_max: f64 },
    /// `μ e^{−ετ} − σ + r − d(x, q)`
    Always { q: Point2, r: f64, mu: f64, decay: f64, sigma: f64 },
    /// `−ln(e^{−h₁} + e^{−h₂})`
    Conjunction(Box<CbfInstance>, Box<CbfInstance>),
    /// `d(x, center)² − radius²`
    Clearance { center: Point2, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbfInstance {
    pub form: BarrierForm,
    /// Absolute activation time; `τ = t − origin`.
    pub origin: f64,
    /// Absolute active window.
    pub window: (f64, f64),
    pub purpose: BarrierPurpose,
}

fn distance_and_direction(x: Point2, q: Point2) -> (f64, Point2) {
    let diff = x - q;
    let d = diff.norm();
    let dir = if d < GRAD_GUARD { Point2::new(0.0, 0.0) } else { diff * (1.0 / d) };
    (d, dir)
}

impl CbfInstance {
    pub fn eval(&self, x: Point2, t: f64) -> CbfEval {
        let tau = t - self.origin;
        match &self.form {
            BarrierForm::Eventually { q, r, a, b, v_max } => {
                let (d, dir) = distance_and_direction(x, *q);
                CbfEval {
                    h: a - a / b * tau + (r - d) / v_max,
                    grad: dir * (-1.0 / v_max),
                    dh_dt: -a / b,
                }
            }
            BarrierForm::Always { q, r, mu, decay, sigma } => {
                let (d, dir) = distance_and_direction(x, *q);
                let e = mu * num::exp(-decay * tau);
                CbfEval {
                    h: e - sigma + r - d,
                    grad: dir * -1.0,
                    dh_dt: -decay * e,
                }
            }
            BarrierForm::Conjunction(first, second) => {
                let e1 = first.eval(x, t);
                let e2 = second.eval(x, t);
                // −ln(e^{−h₁} + e^{−h₂}) = m − ln(e^{m−h₁} + e^{m−h₂}), m = min(h₁, h₂)
                let m = e1.h.min(e2.h);
                let x1 = num::exp(m - e1.h);
                let x2 = num::exp(m - e2.h);
                let total = x1 + x2;
                let (w1, w2) = (x1 / total, x2 / total);
                CbfEval {
                    h: m - num::ln(total),
                    grad: e1.grad * w1 + e2.grad * w2,
                    dh_dt: w1 * e1.dh_dt + w2 * e2.dh_dt,
                }
            }
            BarrierForm::Clearance { center, radius } => {
                let diff = x - *center;
                CbfEval {
                    h: diff.dot(diff) - radius * radius,
                    grad: diff * 2.0,
                    dh_dt: 0.0,
                }
            }
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.window.0 && t <= self.window.1
    }

    /// Re-anchors the barrier at `(x0, t0)`, shifting its window, and
    /// checks `h(x0, t0) ≥ 0`.
    pub fn activate(mut self, x0: Point2, t0: f64) -> Result<Self> {
        self.shift_to(t0);
        let h = self.eval(x0, t0).h;
        if h < -ACTIVATION_TOL {
            return Err(Error::InfeasibleAtActivation { h });
        }
        Ok(self)
    }

    fn shift_to(&mut self, t0: f64) {
        let delta = t0 - self.origin;
        self.origin = t0;
        self.window = (self.window.0 + delta, self.window.1 + delta);
        if let BarrierForm::Conjunction(a, b) = &mut self.form {
            a.shift_to(t0);
            b.shift_to(t0);
        }
    }

    /// Time-invariant clearance barrier around `center`.
    pub fn clearance(center: Point2, radius: f64) -> Self {
        Self {
            form: BarrierForm::Clearance { center, radius },
            origin: 0.0,
            window: (f64::NEG_INFINITY, f64::INFINITY),
            purpose: BarrierPurpose::Collision,
        }
    }
}

/// Barrier for `F_[0,b] d(x, q) ≤ r`, anchored at time 0. At `τ = b` the
/// offset vanishes, so `h ≥ 0` forces `d ≤ r`.
pub fn cbf_eventually(q: Point2, r: f64, a: f64, b: f64, v_max: f64, purpose: BarrierPurpose) -> Result<CbfInstance> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter { name: "b", reason: format!("must be positive, got {b}") });
    }
    if !(v_max > 0.0) || !(r >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter {
            name: "cbf_eventually",
            reason: format!("need v_max > 0, r >= 0 and finite a (v_max={v_max}, r={r}, a={a})"),
        });
    }
    Ok(CbfInstance {
        form: BarrierForm::Eventually { q, r, a, b, v_max },
        origin: 0.0,
        window: (0.0, b),
        purpose,
    })
}

/// Eventually-barrier reaching `q` by the absolute time `deadline`, started
/// from `x0` at `t0`. The offset is `a = max((d(x0, q) − r) / v_max,
/// floor · (deadline − t0))`, the smallest value making `h(x0, t0) ≥ 0`
/// unless the floor is larger.
#[allow(clippy::too_many_arguments)]
pub fn eventually_for_deadline(
    q: Point2,
    r: f64,
    x0: Point2,
    t0: f64,
    deadline: f64,
    v_max: f64,
    floor: f64,
    purpose: BarrierPurpose,
) -> Result<CbfInstance> {
    let b = deadline - t0;
    let needed = (x0.distance(q) - r) / v_max;
    let a = needed.max(floor * b);
    cbf_eventually(q, r, a, b, v_max, purpose)?.activate(x0, t0)
}

/// Barrier for `G_[a,b] d(x, q) ≤ r` with `γ₂(τ) = μ e^{−ετ} − σ`, anchored
/// at time 0. Requires `σ ≥ μ e^{−εa}` so the offset is non-positive on
/// the window.
#[allow(clippy::too_many_arguments)]
pub fn cbf_always(
    q: Point2,
    r: f64,
    a: f64,
    b: f64,
    mu: f64,
    decay: f64,
    sigma: f64,
    purpose: BarrierPurpose,
) -> Result<CbfInstance> {
    if !(b >= a && a >= 0.0) {
        return Err(Error::InvalidParameter { name: "window", reason: format!("need 0 <= a <= b, got [{a}, {b}]") });
    }
    let floor = mu * num::exp(-decay * a);
    if sigma < floor {
        return Err(Error::InvalidParameter {
            name: "cbf_sigma",
            reason: format!("sigma {sigma} is below mu * exp(-decay * a) = {floor}"),
        });
    }
    Ok(CbfInstance {
        form: BarrierForm::Always { q, r, mu, decay, sigma },
        origin: 0.0,
        window: (0.0, b),
        purpose,
    })
}

/// Smooth under-approximation of `min(h₁, h₂)`. The window spans both
/// operands; the origin is the earlier of the two.
pub fn cbf_conjunction(h1: CbfInstance, h2: CbfInstance) -> CbfInstance {
    let window = (h1.window.0.min(h2.window.0), h1.window.1.max(h2.window.1));
    let origin = h1.origin.min(h2.origin);
    let purpose = h1.purpose;
    CbfInstance {
        form: BarrierForm::Conjunction(Box::new(h1), Box::new(h2)),
        origin,
        window,
        purpose,
    }
}
