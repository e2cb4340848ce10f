//! Task assignment as a distributed linear program.
//!
//! Each sub-team assigns its agents to the trajectory task `P` and to any
//! online tasks `O_j`. The assignment matrix `α` (agents × tasks) is the
//! solution of `max trace(Wᵀα)` over doubly stochastic matrices. When agent
//! and task counts differ the problem is made square first: surplus agents
//! get low-value secondary trajectory tasks `P′`, surplus tasks get shadow
//! agents whose winning a task means the task is abandoned.

pub(crate) mod admm;
mod oracle;
mod simplex;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use admm::{
    admm_run, admm_solve, alpha_update_local, diagnostics_csv, u_update_local, z_update_inner,
    AdmmRun, AdmmState, IterationRecord,
};
pub use oracle::{is_permutation, objective_of, oracle_solve};
pub use simplex::project_onto_simplex;

use crate::{Error, Matrix, Point2, Result};

pub type TaskId = u32;

/// Column label of the assignment problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskLabel {
    /// The team's reference trajectory.
    Trajectory,
    /// Online task with its scenario id.
    Online(TaskId),
    /// Padding task `P′_k` (0-based).
    Secondary(usize),
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskLabel::Trajectory => write!(f, "P"),
            TaskLabel::Online(id) => write!(f, "O{id}"),
            TaskLabel::Secondary(k) => write!(f, "P'{}", k + 1),
        }
    }
}

/// Row label of the assignment problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentLabel {
    Real(usize),
    /// Virtual replica hosted (and computed) by real agent `host`.
    Shadow { host: usize, index: usize },
}

impl AgentLabel {
    /// The physical agent that stores and updates this row.
    pub fn host(&self) -> usize {
        match *self {
            AgentLabel::Real(i) => i,
            AgentLabel::Shadow { host, .. } => host,
        }
    }

    pub fn is_shadow(&self) -> bool {
        matches!(self, AgentLabel::Shadow { .. })
    }
}

impl fmt::Display for AgentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentLabel::Real(i) => write!(f, "A{i}"),
            AgentLabel::Shadow { host, index } => write!(f, "S{index}@A{host}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineTaskSpec {
    pub id: TaskId,
    pub location: Point2,
}

/// Tasks of one team at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    /// Next reference waypoint `q_t`.
    pub trajectory: Point2,
    pub secondary_count: usize,
    pub online: Vec<OnlineTaskSpec>,
}

impl TaskSet {
    pub fn new(trajectory: Point2, online: Vec<OnlineTaskSpec>) -> Self {
        Self {
            trajectory,
            secondary_count: 0,
            online,
        }
    }

    pub fn len(&self) -> usize {
        1 + self.secondary_count + self.online.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Column order: `P`, online tasks in the given order, then `P′`.
    pub fn labels(&self) -> Vec<TaskLabel> {
        let mut labels = Vec::with_capacity(self.len());
        labels.push(TaskLabel::Trajectory);
        labels.extend(self.online.iter().map(|t| TaskLabel::Online(t.id)));
        labels.extend((0..self.secondary_count).map(TaskLabel::Secondary));
        labels
    }
}

/// Square roster produced by [`squarify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Squarified {
    pub tasks: TaskSet,
    pub agents: Vec<AgentLabel>,
}

/// Pads agents or tasks so the problem is square. Shadow agents are handed
/// out round-robin over the real agents.
pub fn squarify(agent_count: usize, tasks: &TaskSet) -> Squarified {
    let mut tasks = tasks.clone();
    let mut agents: Vec<AgentLabel> = (0..agent_count).map(AgentLabel::Real).collect();
    let task_count = tasks.len();
    if agent_count > task_count {
        tasks.secondary_count += agent_count - task_count;
    } else if agent_count > 0 {
        for index in 0..task_count - agent_count {
            agents.push(AgentLabel::Shadow {
                host: index % agent_count,
                index,
            });
        }
    }
    Squarified { tasks, agents }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    /// Augmented-Lagrangian penalty, held constant.
    pub rho: f64,
    /// Consensus step size; `None` picks `min(0.5, 0.9 / bound)`.
    pub gd_step: Option<f64>,
    /// Neighbor exchanges per outer round.
    pub inner_iterations: usize,
    pub max_outer: usize,
    pub residual_tol: f64,
    /// Weight perturbation `ε`.
    pub epsilon: f64,
    /// Secondary-task offset `ε′`, far larger than any task distance.
    pub epsilon_prime: f64,
    /// Shadow penalty on the trajectory task; must exceed `2 / ε`.
    pub big_m: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        let epsilon = 0.01;
        Self {
            rho: 1.0,
            gd_step: None,
            inner_iterations: 5,
            max_outer: 2000,
            residual_tol: 1e-6,
            epsilon,
            epsilon_prime: 100.0,
            big_m: 2.5 / epsilon,
        }
    }
}

impl AdmmConfig {
    /// Defaults with `ε′` set to ten workspace diameters.
    pub fn for_workspace_diameter(diameter: f64) -> Self {
        Self {
            epsilon_prime: 10.0 * diameter,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: String) -> Error {
            Error::InvalidParameter { name, reason }
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(bad("rho", format!("must be positive, got {}", self.rho)));
        }
        if !(self.epsilon > 0.0) {
            return Err(bad("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(self.epsilon_prime > self.epsilon) {
            return Err(bad("epsilon_prime", "must be much larger than epsilon".to_string()));
        }
        if !(self.big_m > 2.0 / self.epsilon) {
            return Err(bad(
                "big_m",
                format!("must exceed 2/epsilon = {}, got {}", 2.0 / self.epsilon, self.big_m),
            ));
        }
        if self.inner_iterations == 0 {
            return Err(bad("inner_iterations", "must be at least 1".to_string()));
        }
        if self.max_outer == 0 {
            return Err(bad("max_outer", "must be at least 1".to_string()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(bad("residual_tol", "must be positive".to_string()));
        }
        if let Some(step) = self.gd_step {
            if !(step > 0.0) {
                return Err(bad("gd_step", format!("must be positive, got {step}")));
            }
        }
        Ok(())
    }

    /// Consensus step for a graph whose Laplacian eigenvalues are bounded by
    /// `bound`. Explicit steps above `0.9 / bound` are rejected.
    pub fn resolve_step(&self, bound: f64) -> Result<f64> {
        let cap = if bound > 0.0 { 0.9 / bound } else { f64::INFINITY };
        match self.gd_step {
            None => Ok(cap.min(0.5)),
            Some(step) if step <= cap * (1.0 + 1e-12) => Ok(step),
            Some(step) => Err(Error::InvalidParameter {
                name: "gd_step",
                reason: format!("{step} exceeds the spectral safety bound {cap}"),
            }),
        }
    }
}

/// Square weight matrix with row and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub values: Matrix,
    pub agents: Vec<AgentLabel>,
    pub tasks: Vec<TaskLabel>,
}

impl WeightMatrix {
    /// Plain square instance: rows are real agents, column 0 is `P` and the
    /// rest are online tasks `O1, O2, …`.
    pub fn unlabeled(values: Matrix) -> Self {
        let agents = (0..values.rows()).map(AgentLabel::Real).collect();
        let tasks = (0..values.cols())
            .map(|j| if j == 0 { TaskLabel::Trajectory } else { TaskLabel::Online(j as TaskId) })
            .collect();
        Self { values, agents, tasks }
    }

    pub fn size(&self) -> usize {
        self.values.rows()
    }

    pub fn is_square(&self) -> bool {
        self.values.rows() == self.values.cols()
    }

    pub fn host_of_rows(&self) -> Vec<usize> {
        self.agents.iter().map(AgentLabel::host).collect()
    }

    pub fn real_agent_count(&self) -> usize {
        self.agents.iter().filter(|a| !a.is_shadow()).count()
    }

    pub fn column_of(&self, label: TaskLabel) -> Option<usize> {
        self.tasks.iter().position(|&t| t == label)
    }
}

/// Builds the squarified weight matrix for agents at `agent_positions`.
///
/// * `w_iP   = 1 / (d(q_t, x_i) + ε)`
/// * `w_iOj  = 1 / (d(q_Oj, x_i) + ε)`
/// * `w_iP′k = 1 / (d(q_t, x_i) + ε′)`
/// * shadow rows: `-M` on `P`, `-1 / (d(q_Oj, x_host) + ε)` on `O_j`
pub fn build_weights(
    agent_positions: &[Point2],
    tasks: &TaskSet,
    config: &AdmmConfig,
) -> Result<WeightMatrix> {
    if !(config.epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be positive, got {}", config.epsilon),
        });
    }
    if agent_positions.is_empty() {
        return Err(Error::ShapeMismatch("no agents to assign".to_string()));
    }
    if agent_positions.iter().any(|p| !p.is_finite()) || !tasks.trajectory.is_finite() {
        return Err(Error::InvalidParameter {
            name: "agent_positions",
            reason: "non-finite coordinate".to_string(),
        });
    }
    let Squarified { tasks, agents } = squarify(agent_positions.len(), tasks);
    let labels = tasks.labels();
    let n = agents.len();
    let mut values = Matrix::zeros(n, labels.len());
    for (i, agent) in agents.iter().enumerate() {
        let x = agent_positions[agent.host()];
        for (j, label) in labels.iter().enumerate() {
            let w = match (agent, label) {
                (AgentLabel::Real(_), TaskLabel::Trajectory) => {
                    1.0 / (tasks.trajectory.distance(x) + config.epsilon)
                }
                (AgentLabel::Real(_), TaskLabel::Secondary(_)) => {
                    1.0 / (tasks.trajectory.distance(x) + config.epsilon_prime)
                }
                (AgentLabel::Real(_), TaskLabel::Online(id)) => {
                    1.0 / (online_location(&tasks, *id).distance(x) + config.epsilon)
                }
                (AgentLabel::Shadow { .. }, TaskLabel::Trajectory) => -config.big_m,
                (AgentLabel::Shadow { .. }, TaskLabel::Online(id)) => {
                    -1.0 / (online_location(&tasks, *id).distance(x) + config.epsilon)
                }
                // shadows and secondaries never coexist
                (AgentLabel::Shadow { .. }, TaskLabel::Secondary(_)) => 0.0,
            };
            values[(i, j)] = w;
        }
    }
    Ok(WeightMatrix {
        values,
        agents,
        tasks: labels,
    })
}

fn online_location(tasks: &TaskSet, id: TaskId) -> Point2 {
    tasks
        .online
        .iter()
        .find(|t| t.id == id)
        .map(|t| t.location)
        .expect("label built from the same task set")
}

/// Splitting coefficients; rows are agents, columns tasks.
pub type AssignmentMatrix = Matrix;

/// Per-row argmax with ties going to the lowest column.
pub fn round_assignment(alpha: &AssignmentMatrix) -> Vec<usize> {
    (0..alpha.rows())
        .map(|i| {
            let row = alpha.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn trajectory_weight_examples() {
        let cfg = AdmmConfig::default();
        let tasks = TaskSet::new(Point2::new(3.0, 4.0), vec![]);
        let w = build_weights(&[Point2::new(0.0, 0.0)], &tasks, &cfg).unwrap();
        assert!((w.values[(0, 0)] - 1.0 / 5.01).abs() < 1e-15);
        assert!((w.values[(0, 0)] - 0.199601).abs() < 1e-6);

        let at_waypoint = build_weights(&[Point2::new(3.0, 4.0)], &tasks, &cfg).unwrap();
        assert!((at_waypoint.values[(0, 0)] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn shadow_rows() {
        let cfg = AdmmConfig::default();
        let tasks = TaskSet::new(
            Point2::new(0.0, 0.0),
            vec![
                OnlineTaskSpec { id: 1, location: Point2::new(1.0, 0.0) },
                OnlineTaskSpec { id: 2, location: Point2::new(0.0, 2.0) },
            ],
        );
        let w = build_weights(&[Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)], &tasks, &cfg).unwrap();
        assert_eq!(w.size(), 3);
        assert_eq!(w.agents[2], AgentLabel::Shadow { host: 0, index: 0 });
        assert_eq!(w.values[(2, 0)], -cfg.big_m);
        assert!((w.values[(2, 1)] + 1.0 / 1.01).abs() < 1e-15);
        assert!((w.values[(2, 2)] + 1.0 / 2.01).abs() < 1e-15);
        for i in 0..2 {
            for j in 0..3 {
                assert!(w.values[(i, j)] > 0.0 && w.values[(i, j)] <= 1.0 / cfg.epsilon);
            }
        }
    }

    #[test]
    fn secondary_columns() {
        let cfg = AdmmConfig { epsilon_prime: 50.0, ..AdmmConfig::default() };
        let tasks = TaskSet::new(Point2::new(0.0, 0.0), vec![]);
        let w = build_weights(&[Point2::new(3.0, 4.0), Point2::new(0.0, 0.0)], &tasks, &cfg).unwrap();
        assert_eq!(w.tasks, vec![TaskLabel::Trajectory, TaskLabel::Secondary(0)]);
        assert!((w.values[(0, 1)] - 1.0 / 55.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let cfg = AdmmConfig { epsilon: 0.0, ..AdmmConfig::default() };
        let tasks = TaskSet::new(Point2::new(0.0, 0.0), vec![]);
        assert!(build_weights(&[Point2::new(0.0, 0.0)], &tasks, &cfg).is_err());
    }

    #[test]
    fn squarify_examples() {
        let one = |id| OnlineTaskSpec { id, location: Point2::new(1.0, 1.0) };
        let tasks = TaskSet::new(Point2::new(0.0, 0.0), vec![one(1)]);

        let tall = squarify(3, &tasks);
        assert_eq!(
            tall.tasks.labels(),
            vec![TaskLabel::Trajectory, TaskLabel::Online(1), TaskLabel::Secondary(0)]
        );
        assert_eq!(tall.agents.len(), 3);

        let wide = squarify(2, &TaskSet::new(Point2::new(0.0, 0.0), vec![one(1), one(2)]));
        assert_eq!(wide.agents[2], AgentLabel::Shadow { host: 0, index: 0 });
        assert_eq!(wide.tasks.len(), 3);

        let square = squarify(2, &tasks);
        assert_eq!(square.tasks, tasks);
        assert_eq!(square.agents, vec![AgentLabel::Real(0), AgentLabel::Real(1)]);
    }

    #[test]
    fn rounding_examples() {
        assert_eq!(round_assignment(&Matrix::identity(3)), vec![0, 1, 2]);
        assert_eq!(round_assignment(&Matrix::from_rows(&[[0.5, 0.5]])), vec![0]);
    }

    #[test]
    fn config_validation() {
        assert!(AdmmConfig::default().validate().is_ok());
        let low_m = AdmmConfig { big_m: 150.0, ..AdmmConfig::default() };
        assert!(low_m.validate().is_err());
        let cfg = AdmmConfig { gd_step: Some(0.3), ..AdmmConfig::default() };
        // path of 3: bound 4, cap 0.225
        assert!(cfg.resolve_step(4.0).is_err());
        assert_eq!(AdmmConfig::default().resolve_step(4.0).unwrap(), 0.225);
        assert_eq!(AdmmConfig::default().resolve_step(0.0).unwrap(), 0.5);
    }
}
