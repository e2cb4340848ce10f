//! Small dense strictly convex QP solver (Goldfarb–Idnani dual active set).
//!
//! Solves `min ½ uᵀHu + fᵀu` subject to `aᵢᵀu ≤ bᵢ`. Starting from the
//! unconstrained minimizer, the most violated constraint is added each
//! outer step; constraints whose multiplier would turn negative are dropped
//! on the way. The projections are recomputed from scratch at every step,
//! which is cheap for the handful of variables used here.

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::{cholesky, solve};
use crate::{Error, Matrix, Result};

const RIDGE: f64 = 1e-9;

/// `aᵀu ≤ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub a: Vec<f64>,
    pub b: f64,
}

impl LinearConstraint {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a, b }
    }

    /// `b − aᵀu`; non-negative when satisfied.
    pub fn slack(&self, u: &[f64]) -> f64 {
        self.b - dot(&self.a, u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Vec<f64>,
    /// One multiplier per constraint, zero for inactive ones.
    pub multipliers: Vec<f64>,
    pub active: Vec<usize>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    crate::num::sqrt(dot(a, a))
}

fn inverse_spd(h: &Matrix) -> Result<Matrix> {
    let n = h.rows();
    let factor = cholesky(h).or_else(|| {
        let mut ridged = h.clone();
        for i in 0..n {
            ridged[(i, i)] += RIDGE;
        }
        cholesky(&ridged)
    });
    let l = factor.ok_or(Error::QpFailure("H is not positive definite"))?;
    // columns of H⁻¹ by forward/back substitution on L Lᵀ
    let mut inv = Matrix::zeros(n, n);
    for c in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
            y[i] = (rhs - s) / l[(i, i)];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[(k, i)] * x[k]).sum();
            x[i] = (y[i] - s) / l[(i, i)];
        }
        for r in 0..n {
            inv[(r, c)] = x[r];
        }
    }
    Ok(inv)
}

/// Primal step `z = (B − B N (NᵀBN)⁻¹ NᵀB) n_p` and dual step
/// `r = (NᵀBN)⁻¹ NᵀB n_p` for the active normals `N`.
fn directions(b_inv: &Matrix, normals: &[Vec<f64>], n_p: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let bn_p = b_inv.matvec(n_p);
    if normals.is_empty() {
        return Some((bn_p, Vec::new()));
    }
    let q = normals.len();
    let bn: Vec<Vec<f64>> = normals.iter().map(|n| b_inv.matvec(n)).collect();
    let mut gram = Matrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            gram[(i, j)] = dot(&normals[i], &bn[j]);
        }
    }
    let rhs: Vec<f64> = normals.iter().map(|n| dot(n, &bn_p)).collect();
    let r = solve(&gram, &rhs)?;
    let mut z = bn_p;
    for (k, bn_k) in bn.iter().enumerate() {
        for (zi, v) in z.iter_mut().zip(bn_k) {
            *zi -= r[k] * v;
        }
    }
    Some((z, r))
}

/// Minimizes `½ uᵀHu + fᵀu` subject to `constraints`.
pub fn qp_solve(h: &Matrix, f: &[f64], constraints: &[LinearConstraint]) -> Result<QpSolution> {
    let n = f.len();
    if h.shape() != (n, n) || constraints.iter().any(|c| c.a.len() != n) {
        return Err(Error::ShapeMismatch("QP dimensions disagree".into()));
    }
    let b_inv = inverse_spd(h)?;
    let mut u: Vec<f64> = b_inv.matvec(f).into_iter().map(|v| -v).collect();

    // GI works with nᵀu ≥ b′; here n = −a, b′ = −b and the slack is b − aᵀu.
    let normals: Vec<Vec<f64>> = constraints.iter().map(|c| c.a.iter().map(|v| -v).collect()).collect();
    let violation_tol = |c: &LinearConstraint, u: &[f64]| 1e-12 * (1.0 + c.b.abs() + norm(&c.a) * norm(u));

    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let max_iter = 50 * (constraints.len() + n + 1);
    let mut iterations = 0;

    loop {
        let candidate = constraints
            .iter()
            .enumerate()
            .filter(|(j, _)| !active.contains(j))
            .map(|(j, c)| (j, c.slack(&u), violation_tol(c, &u)))
            .filter(|(_, s, tol)| *s < -tol)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((p, _, _)) = candidate else {
            let mut multipliers = vec![0.0; constraints.len()];
            for (&j, &l) in active.iter().zip(&lambda) {
                multipliers[j] = l;
            }
            return Ok(QpSolution {
                u,
                multipliers,
                active,
                iterations,
            });
        };

        let mut lambda_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::QpFailure("active-set iteration limit"));
            }
            let active_normals: Vec<Vec<f64>> = active.iter().map(|&j| normals[j].clone()).collect();
            let (z, r) = directions(&b_inv, &active_normals, &normals[p])
                .ok_or(Error::QpFailure("dependent active constraints"))?;

            // largest dual step before an active multiplier hits zero
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 0.0 {
                    let ratio = lambda[k] / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }

            let curvature = dot(&z, &normals[p]);
            let z_is_zero = norm(&z) <= 1e-13 * (1.0 + norm(&b_inv.matvec(&normals[p])));
            if z_is_zero || curvature <= 0.0 {
                let Some(k) = drop else {
                    return Err(Error::Infeasible);
                };
                for (l, rk) in lambda.iter_mut().zip(&r) {
                    *l -= t1 * rk;
                }
                lambda_p += t1;
                active.remove(k);
                lambda.remove(k);
                continue;
            }

            let slack_p = constraints[p].slack(&u);
            let t2 = -slack_p / curvature;
            let t = t1.min(t2);
            for (ui, zi) in u.iter_mut().zip(&z) {
                *ui += t * zi;
            }
            for (l, rk) in lambda.iter_mut().zip(&r) {
                *l -= t * rk;
            }
            lambda_p += t;

            if t2 <= t1 {
                active.push(p);
                lambda.push(lambda_p);
                break;
            }
            let k = drop.expect("finite t1 has a blocking index");
            active.remove(k);
            lambda.remove(k);
        }
    }
}

/// Stationarity, primal feasibility and complementarity residuals (all
/// reported as non-negative magnitudes).
pub fn kkt_residuals(h: &Matrix, f: &[f64], constraints: &[LinearConstraint], sol: &QpSolution) -> (f64, f64, f64) {
    let mut grad = h.matvec(&sol.u);
    for (g, fi) in grad.iter_mut().zip(f) {
        *g += fi;
    }
    for (c, &l) in constraints.iter().zip(&sol.multipliers) {
        for (g, a) in grad.iter_mut().zip(&c.a) {
            *g += l * a;
        }
    }
    let stationarity = grad.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let feasibility = constraints.iter().fold(0.0_f64, |m, c| m.max(-c.slack(&sol.u)));
    let complementarity = constraints
        .iter()
        .zip(&sol.multipliers)
        .fold(0.0_f64, |m, (c, &l)| m.max((l * c.slack(&sol.u)).abs()).max(-l));
    (stationarity, feasibility, complementarity)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_point_on_halfplane() {
        let h = Matrix::identity(3);
        let c = [LinearConstraint::new(vec![-1.0, 0.0, 0.0], -1.0)];
        let sol = qp_solve(&h, &[0.0; 3], &c).unwrap();
        assert!((sol.u[0] - 1.0).abs() < 1e-14 && sol.u[1] == 0.0 && sol.u[2] == 0.0);
        assert!((sol.multipliers[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unconstrained_minimum() {
        let h = Matrix::identity(2);
        let sol = qp_solve(&h, &[-2.0 * 0.3, -2.0 * -0.7], &[]);
        // ½‖u‖² − 2u_refᵀu has minimum at 2·u_ref; with H = 2I it is u_ref
        let sol2 = qp_solve(&h.scale(2.0), &[-2.0 * 0.3, -2.0 * -0.7], &[]).unwrap();
        assert_eq!(sol.unwrap().u, vec![0.6, -1.4]);
        assert!((sol2.u[0] - 0.3).abs() < 1e-15 && (sol2.u[1] + 0.7).abs() < 1e-15);
    }

    #[test]
    fn detects_infeasibility() {
        let h = Matrix::identity(1);
        let c = [LinearConstraint::new(vec![1.0], -1.0), LinearConstraint::new(vec![-1.0], -1.0)];
        assert_eq!(qp_solve(&h, &[0.0], &c), Err(Error::Infeasible));
    }

    #[test]
    fn drops_constraint_that_stops_binding() {
        // min ½‖u‖² − (2, 2)ᵀu with u₁ ≤ 1, u₁ + u₂ ≤ 1
        let h = Matrix::identity(2);
        let c = [LinearConstraint::new(vec![1.0, 0.0], 1.0), LinearConstraint::new(vec![1.0, 1.0], 1.0)];
        let sol = qp_solve(&h, &[-2.0, -2.0], &c).unwrap();
        assert!((sol.u[0] - 0.5).abs() < 1e-12 && (sol.u[1] - 0.5).abs() < 1e-12);
        let (s, p, k) = kkt_residuals(&h, &[-2.0, -2.0], &c, &sol);
        assert!(s < 1e-12 && p < 1e-12 && k < 1e-12);
    }

    #[test]
    fn duplicate_rows() {
        let h = Matrix::identity(2);
        let row = LinearConstraint::new(vec![1.0, 0.0], -1.0);
        let sol = qp_solve(&h, &[0.0, 0.0], &[row.clone(), row]).unwrap();
        assert!((sol.u[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_hessian_gets_ridge() {
        let h = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        let c = [LinearConstraint::new(vec![0.0, 1.0], 1.0), LinearConstraint::new(vec![0.0, -1.0], 1.0)];
        let sol = qp_solve(&h, &[-1.0, 0.0], &c).unwrap();
        assert!((sol.u[0] - 1.0).abs() < 1e-6);
    }
}
