//! Inexact consensus ADMM for the square assignment problem.
//!
//! One outer round is
//!
//! 1. `α_i ← Π_simplex(z_i − u_i + w_i/ρ)` independently per agent,
//! 2. a few consensus steps `z ← z − ε L (z − (α + u))`, each needing one
//!    exchange with neighbors; column sums of `z` never move,
//! 3. `u_i ← u_i + α_i − z_i`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{project_onto_simplex, AdmmConfig, AssignmentMatrix, WeightMatrix};
use crate::graph::{local_laplacian_apply, CommGraph};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub alpha: AssignmentMatrix,
    /// Consensus copy of `alpha`; its columns always sum to one.
    pub z: Matrix,
    /// Scaled dual variable.
    pub u: Matrix,
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl AdmmState {
    /// `α = z = 1/n` everywhere, `u = 0`. Rows and columns of the square
    /// start already sum to one.
    pub fn uniform(n: usize) -> Self {
        let fill = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        Self {
            alpha: Matrix::filled(n, n, fill),
            z: Matrix::filled(n, n, fill),
            u: Matrix::zeros(n, n),
            iteration: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        }
    }

    pub fn size(&self) -> usize {
        self.alpha.rows()
    }
}

/// One row of the outer-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `trace(Wᵀα)` after the round.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct AdmmRun {
    pub state: AdmmState,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    /// Consensus step that was used.
    pub step: f64,
    /// Largest `|1ᵀz_col − 1|` seen after any consensus step.
    pub max_column_drift: f64,
    /// `(z, u)` after every outer round, when requested.
    pub iterates: Vec<(Matrix, Matrix)>,
}

/// Local α-update: projection of `z_i − u_i + w_i/ρ` onto the simplex.
pub fn alpha_update_local(w_i: &[f64], z_i: &[f64], u_i: &[f64], rho: f64) -> Vec<f64> {
    debug_assert!(w_i.len() == z_i.len() && z_i.len() == u_i.len());
    let v: Vec<f64> = w_i
        .iter()
        .zip(z_i)
        .zip(u_i)
        .map(|((w, z), u)| z - u + w / rho)
        .collect();
    project_onto_simplex(&v)
}

/// `u_i + α_i − z_i`.
pub fn u_update_local(u_i: &[f64], alpha_i: &[f64], z_i: &[f64]) -> Vec<f64> {
    u_i.iter()
        .zip(alpha_i)
        .zip(z_i)
        .map(|((u, a), z)| u + a - z)
        .collect()
}

/// One consensus step over all rows. `alpha_plus_u` is held fixed through
/// the inner loop. Neighbors are visited in ascending order so a
/// message-passing run reproduces this bit for bit.
pub(crate) fn consensus_step(z: &Matrix, alpha_plus_u: &Matrix, graph: &CommGraph, step: f64) -> Matrix {
    let v = z.sub(alpha_plus_u);
    let mut next = z.clone();
    for r in 0..z.rows() {
        let lv = local_laplacian_apply(v.row(r), graph.neighbors(r).iter().map(|&s| v.row(s)));
        apply_consensus_row(next.row_mut(r), &lv, step);
    }
    next
}

pub(crate) fn apply_consensus_row(z_row: &mut [f64], lv: &[f64], step: f64) {
    for (z, l) in z_row.iter_mut().zip(lv) {
        *z -= step * l;
    }
}

/// A single inner z-iteration `z ← z − ε L (z − α − u)` on the row graph.
pub fn z_update_inner(state: &AdmmState, row_graph: &CommGraph, config: &AdmmConfig) -> Result<AdmmState> {
    let step = config.resolve_step(2.0 * row_graph.max_degree() as f64)?;
    if row_graph.node_count() != state.size() {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} nodes, state has {} rows",
            row_graph.node_count(),
            state.size()
        )));
    }
    let au = state.alpha.add(&state.u);
    let mut next = state.clone();
    next.z = consensus_step(&state.z, &au, row_graph, step);
    Ok(next)
}

pub(crate) struct Problem {
    pub row_graph: CommGraph,
    pub step: f64,
}

/// Checks shapes and builds the row-level graph (shadow rows share their
/// host's node).
pub(crate) fn prepare(w: &WeightMatrix, graph: &CommGraph, config: &AdmmConfig) -> Result<Problem> {
    config.validate()?;
    if !w.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "weight matrix is {}x{}; squarify first",
            w.values.rows(),
            w.values.cols()
        )));
    }
    if w.agents.len() != w.size() || w.tasks.len() != w.size() {
        return Err(Error::ShapeMismatch("labels do not match the weight matrix".into()));
    }
    if w.real_agent_count() != graph.node_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} real agents but the graph has {} nodes",
            w.real_agent_count(),
            graph.node_count()
        )));
    }
    let row_graph = graph.expand_for_rows(&w.host_of_rows())?;
    let step = config.resolve_step(2.0 * row_graph.max_degree() as f64)?;
    Ok(Problem { row_graph, step })
}

pub(crate) fn residuals(state: &AdmmState, z_prev: &Matrix, rho: f64) -> (f64, f64) {
    let primal = state.alpha.sub(&state.z).frobenius_norm();
    let dual = rho * state.z.sub(z_prev).frobenius_norm();
    (primal, dual)
}

pub(crate) fn column_drift(z: &Matrix) -> f64 {
    z.column_sums().into_iter().fold(0.0, |m, s| m.max((s - 1.0).abs()))
}

/// Runs the centralized iteration until both residuals drop below the
/// tolerance or `max_outer` rounds pass. Non-convergence is reported in
/// the result, not as an error.
pub fn admm_run(
    w: &WeightMatrix,
    graph: &CommGraph,
    config: &AdmmConfig,
    warm_start: Option<&AdmmState>,
    record_iterates: bool,
) -> Result<AdmmRun> {
    let Problem { row_graph, step } = prepare(w, graph, config)?;
    let n = w.size();
    let mut state = match warm_start {
        Some(s) if s.size() == n => AdmmState {
            iteration: 0,
            ..s.clone()
        },
        _ => AdmmState::uniform(n),
    };

    let mut history = Vec::new();
    let mut iterates = Vec::new();
    let mut max_column_drift = column_drift(&state.z);
    let mut converged = false;

    for k in 1..=config.max_outer {
        for i in 0..n {
            let row = alpha_update_local(w.values.row(i), state.z.row(i), state.u.row(i), config.rho);
            state.alpha.set_row(i, &row);
        }

        let au = state.alpha.add(&state.u);
        let z_prev = state.z.clone();
        for _ in 0..config.inner_iterations {
            state.z = consensus_step(&state.z, &au, &row_graph, step);
            max_column_drift = max_column_drift.max(column_drift(&state.z));
        }

        for i in 0..n {
            let row = u_update_local(state.u.row(i), state.alpha.row(i), state.z.row(i));
            state.u.set_row(i, &row);
        }

        let (primal, dual) = residuals(&state, &z_prev, config.rho);
        state.iteration = k;
        state.primal_residual = primal;
        state.dual_residual = dual;
        history.push(IterationRecord {
            iteration: k,
            primal_residual: primal,
            dual_residual: dual,
            objective: w.values.inner(&state.alpha),
        });
        if record_iterates {
            iterates.push((state.z.clone(), state.u.clone()));
        }
        if primal < config.residual_tol && dual < config.residual_tol {
            converged = true;
            break;
        }
    }

    Ok(AdmmRun {
        state,
        history,
        converged,
        step,
        max_column_drift,
        iterates,
    })
}

/// Centralized solve from the uniform start. Returns the final `α` and the
/// per-round diagnostics, or [`Error::NonConvergence`].
pub fn admm_solve(
    w: &WeightMatrix,
    graph: &CommGraph,
    config: &AdmmConfig,
) -> Result<(AssignmentMatrix, Vec<IterationRecord>)> {
    let run = admm_run(w, graph, config, None, false)?;
    if !run.converged {
        return Err(Error::NonConvergence {
            rounds: run.state.iteration,
            primal: run.state.primal_residual,
            dual: run.state.dual_residual,
        });
    }
    Ok((run.state.alpha, run.history))
}

/// `iteration,primal_residual,dual_residual,objective` rows.
pub fn diagnostics_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,primal_residual,dual_residual,objective\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.iteration, r.primal_residual, r.dual_residual, r.objective
        );
    }
    out
}
