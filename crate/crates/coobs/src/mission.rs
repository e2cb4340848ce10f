//! Mission loop.
//!
//! At every integer timestep `t` the loop first settles what is due at `t`
//! (co-observations, regroups, releases), then checks online tasks against
//! the team's regroup table, runs one distributed assignment per team and
//! finally integrates the robots through the control ticks of `[t, t+1)`.

use coobs_core::assignment::{
    build_weights, round_assignment, squarify, AdmmState, AgentLabel, OnlineTaskSpec, TaskId, TaskLabel, TaskSet,
};
use coobs_core::control::{
    eventually_for_deadline, reference_control, security_filter, split_barrier_rows, BarrierPurpose, CbfInstance,
    QpStatus,
};
use coobs_core::geometry::point_in_polygon;
use coobs_core::netsim::run_network;
use coobs_core::security::{build_lookup_table, online_task_admissible, OnlineTask, RegroupLookupTable, TaskStatus};
use coobs_core::Point2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::scenario::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum MissionError {
    #[error("team {team}: {source}")]
    Team {
        team: usize,
        #[source]
        source: coobs_core::Error,
    },
    #[error("agent {agent} at t = {time}: {source}")]
    Control {
        agent: usize,
        time: f64,
        #[source]
        source: coobs_core::Error,
    },
    #[error("task {task}: {source}")]
    Task {
        task: TaskId,
        #[source]
        source: coobs_core::Error,
    },
}

/// One record of the mission log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Seconds since mission start.
    pub t: f64,
    pub kind: String,
    pub agent: Option<usize>,
    pub task: Option<TaskId>,
    pub detail: serde_json::Value,
}

/// Append-only log with non-decreasing timestamps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimEventLog {
    events: Vec<Event>,
}

impl SimEventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        if let Some(last) = self.events.last() {
            assert!(event.t >= last.t, "event log timestamps must not decrease");
        }
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn from_events(events: Vec<Event>) -> Self {
        Self { events }
    }
}

/// Agent position and assignment at one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: usize,
    pub time: f64,
    pub agent: usize,
    pub team: usize,
    pub position: Point2,
    pub task: String,
    pub alpha_p: f64,
    pub alpha_sec: f64,
    /// One entry per scenario online task, in scenario order.
    pub alpha_o: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlRow {
    pub time: f64,
    pub agent: usize,
    pub u: Point2,
    pub active_barriers: usize,
    pub min_h: f64,
    pub qp_status: QpStatus,
}

/// One α entry of a team snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentRow {
    pub timestep: usize,
    pub team: usize,
    pub row: String,
    pub task: String,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub online_tasks: usize,
    pub fulfilled: usize,
    pub abandoned: usize,
    pub rejected: usize,
    pub admm_runs: usize,
    pub admm_rounds: usize,
    pub admm_messages: u64,
    pub admm_nonconvergence: usize,
    pub max_column_drift: f64,
    pub co_observations_ok: usize,
    pub co_observations_missed: usize,
    pub regroups_ok: usize,
    pub regroups_missed: usize,
    pub forbidden_entries: usize,
    pub qp_fallback_ticks: usize,
    pub qp_zero_ticks: usize,
    /// Smallest value of any unrelaxed co-observation barrier.
    pub min_h_co_observation: Option<f64>,
    /// Smallest value of any unrelaxed regroup barrier.
    pub min_h_regroup: Option<f64>,
    pub min_pairwise_distance: Option<f64>,
    pub min_obstacle_clearance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MissionOutput {
    pub traces: Vec<TraceRow>,
    pub log: SimEventLog,
    pub metrics: Metrics,
    pub controls: Vec<ControlRow>,
    pub assignments: Vec<AssignmentRow>,
    /// Regroup table per team id.
    pub tables: Vec<(usize, RegroupLookupTable)>,
}

pub fn task_label_name(label: TaskLabel) -> String {
    match label {
        TaskLabel::Trajectory => "P".into(),
        TaskLabel::Secondary(k) => format!("P'{k}"),
        TaskLabel::Online(id) => format!("O{id}"),
    }
}

#[derive(Debug, Clone)]
struct Commitment {
    task: TaskId,
    location: Point2,
    regroup: usize,
    alpha_o: f64,
    fulfilled: bool,
}

#[derive(Debug, Clone)]
struct Agent {
    team: usize,
    x: Point2,
    tasks: TaskSet,
    alpha: Vec<f64>,
    label: String,
    commitment: Option<Commitment>,
    barriers: Vec<CbfInstance>,
    in_forbidden: Option<usize>,
}

impl Agent {
    fn alpha_of(&self, wanted: TaskLabel) -> f64 {
        self.tasks
            .labels()
            .iter()
            .zip(&self.alpha)
            .filter(|(l, _)| **l == wanted)
            .map(|(_, a)| *a)
            .sum()
    }

    fn alpha_p(&self) -> f64 {
        match &self.commitment {
            Some(c) => 1.0 - c.alpha_o,
            None => self.alpha_of(TaskLabel::Trajectory),
        }
    }

    fn alpha_task(&self, task: TaskId) -> f64 {
        match &self.commitment {
            Some(c) if c.task == task => c.alpha_o,
            Some(_) => 0.0,
            None => self.alpha_of(TaskLabel::Online(task)),
        }
    }

    fn alpha_sec(&self) -> f64 {
        if self.commitment.is_some() {
            return 0.0;
        }
        self.tasks
            .labels()
            .iter()
            .zip(&self.alpha)
            .filter(|(l, _)| matches!(l, TaskLabel::Secondary(_)))
            .map(|(_, a)| *a)
            .sum()
    }
}

struct TeamState {
    id: usize,
    members: Vec<usize>,
    table: RegroupLookupTable,
    previous: Option<(Vec<usize>, Vec<TaskLabel>, AdmmState)>,
    p_holder: Option<usize>,
}

struct TaskState {
    spec_index: usize,
    task: OnlineTask,
    team: Option<usize>,
    /// Team and `t_r` when admissible at the current step.
    admissible_now: Option<(usize, usize)>,
    ever_admissible: bool,
    announced: bool,
}

struct Mission<'a> {
    cfg: &'a ScenarioConfig,
    agents: Vec<Agent>,
    teams: Vec<TeamState>,
    tasks: Vec<TaskState>,
    log: SimEventLog,
    metrics: Metrics,
    traces: Vec<TraceRow>,
    controls: Vec<ControlRow>,
    assignments: Vec<AssignmentRow>,
    ticks_per_step: usize,
}

fn min_opt(slot: &mut Option<f64>, v: f64) {
    *slot = Some(slot.map_or(v, |m: f64| m.min(v)));
}

fn point_json(p: Point2) -> serde_json::Value {
    json!([p.x, p.y])
}

impl<'a> Mission<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let starts = cfg.jittered_starts();
        let mut agents = Vec::new();
        let mut teams = Vec::new();
        for (k, team) in cfg.teams.iter().enumerate() {
            let first = agents.len();
            for _ in 0..team.size() {
                let x = starts[agents.len()];
                agents.push(Agent {
                    team: k,
                    x,
                    tasks: TaskSet::new(team.trajectory.at(1), Vec::new()),
                    alpha: vec![1.0],
                    label: String::new(),
                    commitment: None,
                    barriers: Vec::new(),
                    in_forbidden: None,
                });
            }
            teams.push(TeamState {
                id: team.id,
                members: (first..agents.len()).collect(),
                table: build_lookup_table(&team.trajectory, &cfg.forbidden, cfg.v_max),
                previous: None,
                p_holder: None,
            });
        }
        let tasks = cfg
            .online_tasks
            .iter()
            .enumerate()
            .map(|(k, t)| TaskState {
                spec_index: k,
                task: OnlineTask::new(t.id, t.appear_time, t.location),
                team: t.team,
                admissible_now: None,
                ever_admissible: false,
                announced: false,
            })
            .collect();
        Self {
            cfg,
            agents,
            teams,
            tasks,
            log: SimEventLog::new(),
            metrics: Metrics {
                online_tasks: cfg.online_tasks.len(),
                ..Metrics::default()
            },
            traces: Vec::new(),
            controls: Vec::new(),
            assignments: Vec::new(),
            ticks_per_step: cfg.ticks_per_step(),
        }
    }

    fn time_of_tick(&self, tick: usize) -> f64 {
        tick as f64 * self.cfg.dt
    }

    fn step_time(&self, t: usize) -> f64 {
        self.time_of_tick(t * self.ticks_per_step)
    }

    fn event(&mut self, t: f64, kind: &str, agent: Option<usize>, task: Option<TaskId>, detail: serde_json::Value) {
        self.log.push(Event {
            t,
            kind: kind.to_string(),
            agent,
            task,
            detail,
        });
    }

    fn set_status(&mut self, k: usize, next: TaskStatus) -> Result<(), MissionError> {
        let id = self.tasks[k].task.id;
        self.tasks[k]
            .task
            .transition(next)
            .map_err(|source| MissionError::Task { task: id, source })
    }

    fn run(mut self) -> Result<MissionOutput, MissionError> {
        let horizon = self.cfg.horizon;
        for t in 0..=horizon {
            self.settle(t)?;
            if t == horizon {
                self.record_trace(t * self.ticks_per_step);
                break;
            }
            self.refresh_co_observation_barriers(t)?;
            self.check_tasks(t)?;
            for k in 0..self.teams.len() {
                self.assign(k, t)?;
            }
            for i in 0..self.ticks_per_step {
                self.tick(t, t * self.ticks_per_step + i)?;
            }
        }
        self.finish()
    }

    /// Co-observation and regroup checks due at step `t`.
    fn settle(&mut self, t: usize) -> Result<(), MissionError> {
        let now = self.step_time(t);
        let cfg = self.cfg;
        for c in cfg.co_observations.iter().filter(|c| c.time == t) {
            let near = |team_id: usize| -> Vec<(usize, Point2)> {
                let k = cfg.teams.iter().position(|tm| tm.id == team_id).expect("validated");
                let q = cfg.teams[k].trajectory.at(t);
                self.teams[k]
                    .members
                    .iter()
                    .map(|&i| (i, self.agents[i].x))
                    .filter(|(_, x)| x.distance(q) <= c.r1)
                    .collect()
            };
            let (a, b) = (near(c.teams.0), near(c.teams.1));
            let best = a
                .iter()
                .flat_map(|&(i, xi)| b.iter().map(move |&(j, xj)| (i, j, xi.distance(xj))))
                .min_by(|p, q| p.2.total_cmp(&q.2));
            let ok = matches!(best, Some((_, _, d)) if d <= 2.0 * c.r1);
            let detail = json!({
                "step": t,
                "teams": [c.teams.0, c.teams.1],
                "agents": best.map(|(i, j, _)| json!([i, j])),
                "distance": best.map(|(_, _, d)| d),
            });
            if ok {
                self.metrics.co_observations_ok += 1;
                self.event(now, "co-observation-ok", None, None, detail);
            } else {
                self.metrics.co_observations_missed += 1;
                self.event(now, "co-observation-missed", None, None, detail);
            }
        }

        for i in 0..self.agents.len() {
            let Some(c) = self.agents[i].commitment.clone() else { continue };
            if c.regroup != t {
                continue;
            }
            let team = &cfg.teams[self.agents[i].team];
            let d = self.agents[i].x.distance(team.trajectory.at(t));
            let ok = d <= cfg.regroup_radius;
            let detail = json!({ "team": team.id, "step": t, "distance": d });
            if ok {
                self.metrics.regroups_ok += 1;
                self.event(now, "regroup-ok", Some(i), Some(c.task), detail);
            } else {
                self.metrics.regroups_missed += 1;
                self.event(now, "regroup-missed", Some(i), Some(c.task), detail);
            }
            let k = self.tasks.iter().position(|s| s.task.id == c.task).expect("committed task exists");
            if !c.fulfilled {
                self.set_status(k, TaskStatus::Abandoned)?;
                self.metrics.abandoned += 1;
                self.event(now, "task-abandoned", Some(i), Some(c.task), json!({ "reason": "regroup deadline" }));
            }
            self.agents[i].commitment = None;
            let members = self.teams[self.agents[i].team].members.clone();
            for m in members {
                self.agents[m]
                    .barriers
                    .retain(|b| b.purpose != BarrierPurpose::Regroup(c.task));
            }
        }
        Ok(())
    }

    fn co_observation_barrier(&self, team: usize, agent: usize, t: usize) -> Result<Option<CbfInstance>, MissionError> {
        let cfg = self.cfg;
        let Some(next) = cfg.teams[team].schedule.next_at_or_after(t + 1) else {
            return Ok(None);
        };
        eventually_for_deadline(
            next.location,
            cfg.barrier_radius_fraction * next.r1,
            self.agents[agent].x,
            self.step_time(t),
            self.step_time(next.time),
            cfg.barrier_speed(),
            cfg.control.eventually_floor,
            BarrierPurpose::CoObservation,
        )
        .map(Some)
        .map_err(|source| MissionError::Team { team: cfg.teams[team].id, source })
    }

    /// Starts the window towards the next co-observation at `t = 0` and
    /// right after each co-observation.
    fn refresh_co_observation_barriers(&mut self, t: usize) -> Result<(), MissionError> {
        for k in 0..self.teams.len() {
            let starts_window = t == 0 || self.cfg.teams[k].schedule.entries().iter().any(|e| e.time == t);
            if !starts_window {
                continue;
            }
            for i in self.teams[k].members.clone() {
                let barrier = self.co_observation_barrier(k, i, t)?;
                let agent = &mut self.agents[i];
                agent.barriers.retain(|b| b.purpose != BarrierPurpose::CoObservation);
                agent.barriers.extend(barrier);
            }
        }
        Ok(())
    }

    fn check_tasks(&mut self, t: usize) -> Result<(), MissionError> {
        if t == 0 {
            return Ok(());
        }
        let now = self.step_time(t);
        let cfg = self.cfg;
        for k in 0..self.tasks.len() {
            self.tasks[k].admissible_now = None;
            let state = &self.tasks[k];
            if state.task.appear_time > t || state.task.status().is_terminal() {
                continue;
            }
            if matches!(state.task.status(), TaskStatus::Assigned { .. }) {
                continue;
            }
            if !state.announced {
                self.tasks[k].announced = true;
                let spec = &cfg.online_tasks[self.tasks[k].spec_index];
                self.event(
                    now,
                    "task-appeared",
                    None,
                    Some(spec.id),
                    json!({ "location": point_json(spec.location), "team": spec.team }),
                );
            }
            let state = &self.tasks[k];
            let found = self.teams.iter().enumerate().find_map(|(ti, team)| {
                if state.team.is_some_and(|id| id != team.id) {
                    return None;
                }
                let traj = &cfg.teams[ti].trajectory;
                online_task_admissible(&state.task, traj.at(t), t, &team.table, traj, cfg.v_max).map(|tr| (ti, tr))
            });
            if let Some((ti, t_r)) = found {
                let id = self.tasks[k].task.id;
                self.set_status(k, TaskStatus::Admissible { regroup: t_r })?;
                self.tasks[k].admissible_now = Some((ti, t_r));
                self.tasks[k].ever_admissible = true;
                let team_id = self.teams[ti].id;
                self.event(now, "task-admissible", None, Some(id), json!({ "team": team_id, "step": t, "regroup": t_r }));
            }
        }
        Ok(())
    }

    fn assign(&mut self, k: usize, t: usize) -> Result<(), MissionError> {
        let cfg = self.cfg;
        let team_cfg = &cfg.teams[k];
        let team_id = team_cfg.id;
        let now = self.step_time(t);
        let team_err = |source| MissionError::Team { team: team_id, source };

        let members = self.teams[k].members.clone();
        let free: Vec<usize> = members.iter().copied().filter(|&i| self.agents[i].commitment.is_none()).collect();
        let target = team_cfg.trajectory.at(t + 1);

        // committed agents follow their own two-task row
        for &i in &members {
            let agent = &mut self.agents[i];
            if let Some(c) = &agent.commitment {
                if c.fulfilled {
                    agent.tasks = TaskSet::new(target, Vec::new());
                    agent.alpha = vec![1.0];
                } else {
                    agent.tasks = TaskSet::new(target, vec![OnlineTaskSpec { id: c.task, location: c.location }]);
                    agent.alpha = vec![1.0 - c.alpha_o, c.alpha_o];
                }
                agent.label = format!("O{}", c.task);
            }
        }
        if free.is_empty() {
            return Ok(());
        }

        let mut offered: Vec<(usize, usize)> = self
            .tasks
            .iter()
            .enumerate()
            .filter_map(|(ti, s)| match s.admissible_now {
                Some((team, t_r)) if team == k => Some((ti, t_r)),
                _ => None,
            })
            .collect();
        offered.sort_by_key(|&(ti, _)| self.tasks[ti].task.id);
        let online: Vec<OnlineTaskSpec> = offered
            .iter()
            .map(|&(ti, _)| OnlineTaskSpec {
                id: self.tasks[ti].task.id,
                location: self.tasks[ti].task.location,
            })
            .collect();
        let task_set = TaskSet::new(target, online);
        let squared = squarify(free.len(), &task_set).tasks;
        let positions: Vec<Point2> = free.iter().map(|&i| self.agents[i].x).collect();
        let w = build_weights(&positions, &task_set, &cfg.admm).map_err(team_err)?;
        let graph = team_cfg
            .graph
            .relay_closure(&free.iter().map(|&i| i - members[0]).collect::<Vec<_>>())
            .map_err(team_err)?;

        let warm = match &self.teams[k].previous {
            Some((agents, labels, state)) if *agents == free && *labels == w.tasks => Some(state.clone()),
            _ => None,
        };
        let run = run_network(&graph, &w, &cfg.admm, warm.as_ref(), false).map_err(team_err)?;
        self.metrics.admm_runs += 1;
        self.metrics.admm_rounds += run.state.iteration;
        self.metrics.admm_messages += run.message_count;
        self.metrics.max_column_drift = self.metrics.max_column_drift.max(run.max_column_drift);

        let alpha = if run.converged {
            run.state.alpha.clone()
        } else {
            self.metrics.admm_nonconvergence += 1;
            self.event(
                now,
                "admm-nonconvergence",
                None,
                None,
                json!({
                    "team": team_id,
                    "step": t,
                    "rounds": run.state.iteration,
                    "primal": run.state.primal_residual,
                    "dual": run.state.dual_residual,
                }),
            );
            match &warm {
                Some(previous) => previous.alpha.clone(),
                None => run.state.alpha.clone(),
            }
        };
        if run.converged {
            self.teams[k].previous = Some((free.clone(), w.tasks.clone(), run.state.clone()));
        }

        let row_names: Vec<String> = w
            .agents
            .iter()
            .map(|a| match a {
                AgentLabel::Real(r) => format!("a{}", free[*r]),
                AgentLabel::Shadow { host, index } => format!("shadow{index}(a{})", free[*host]),
            })
            .collect();
        let task_names: Vec<String> = w.tasks.iter().map(|&l| task_label_name(l)).collect();
        for (r, name) in row_names.iter().enumerate() {
            for (c, task) in task_names.iter().enumerate() {
                self.assignments.push(AssignmentRow {
                    timestep: t,
                    team: team_id,
                    row: name.clone(),
                    task: task.clone(),
                    alpha: alpha[(r, c)],
                });
            }
        }
        let alpha_rows: Vec<Vec<f64>> = (0..alpha.rows()).map(|r| alpha.row(r).to_vec()).collect();
        self.event(
            now,
            "assignment-snapshot",
            None,
            None,
            json!({
                "team": team_id,
                "step": t,
                "rows": row_names,
                "tasks": task_names,
                "alpha": alpha_rows,
                "converged": run.converged,
                "warm_start": warm.is_some(),
                "rounds": run.state.iteration,
                "messages": run.message_count,
            }),
        );

        let perm = round_assignment(&alpha);
        let p_col = w.column_of(TaskLabel::Trajectory).expect("trajectory task is always present");
        let real = free.len();
        let p_row = (0..real).find(|&r| perm[r] == p_col).unwrap_or_else(|| {
            (0..real).max_by(|&a, &b| alpha[(a, p_col)].total_cmp(&alpha[(b, p_col)])).expect("at least one agent")
        });
        let p_holder = free[p_row];

        for (r, &i) in free.iter().enumerate() {
            let agent = &mut self.agents[i];
            agent.tasks = squared.clone();
            agent.alpha = alpha.row(r).to_vec();
            agent.label = task_label_name(w.tasks[perm[r]]);
        }
        if self.teams[k].p_holder != Some(p_holder) {
            self.teams[k].p_holder = Some(p_holder);
            if t > 0 {
                let barrier = self.co_observation_barrier(k, p_holder, t)?;
                let agent = &mut self.agents[p_holder];
                agent.barriers.retain(|b| b.purpose != BarrierPurpose::CoObservation);
                agent.barriers.extend(barrier);
            }
        }

        if !run.converged {
            return Ok(());
        }
        let mut decided: Vec<TaskId> = Vec::new();
        for (r, agent_label) in w.agents.iter().enumerate() {
            let TaskLabel::Online(id) = w.tasks[perm[r]] else { continue };
            if decided.contains(&id) {
                continue;
            }
            decided.push(id);
            let &(ti, t_r) = offered.iter().find(|(ti, _)| self.tasks[*ti].task.id == id).expect("offered task");
            let host = free[agent_label.host()];
            let shadow = agent_label.is_shadow();
            self.set_status(ti, TaskStatus::Assigned { agent: host, regroup: t_r, shadow })?;
            self.event(
                now,
                "task-assigned",
                Some(host),
                Some(id),
                json!({ "team": team_id, "step": t, "regroup": t_r, "shadow": shadow }),
            );
            if shadow {
                self.set_status(ti, TaskStatus::Abandoned)?;
                self.metrics.abandoned += 1;
                self.event(now, "task-abandoned", Some(host), Some(id), json!({ "reason": "assigned to shadow agent" }));
                continue;
            }
            let location = self.tasks[ti].task.location;
            let alpha_o = alpha[(r, perm[r])];
            let q_r = team_cfg.trajectory.at(t_r);
            for &m in &members {
                let barrier = eventually_for_deadline(
                    q_r,
                    cfg.barrier_radius_fraction * cfg.regroup_radius,
                    self.agents[m].x,
                    now,
                    self.step_time(t_r),
                    cfg.barrier_speed(),
                    cfg.control.eventually_floor,
                    BarrierPurpose::Regroup(id),
                )
                .map_err(team_err)?;
                self.agents[m].barriers.push(barrier);
            }
            let agent = &mut self.agents[host];
            agent.commitment = Some(Commitment {
                task: id,
                location,
                regroup: t_r,
                alpha_o,
                fulfilled: false,
            });
            agent.tasks = TaskSet::new(target, vec![OnlineTaskSpec { id, location }]);
            agent.alpha = vec![1.0 - alpha_o, alpha_o];
            agent.label = format!("O{id}");
        }
        Ok(())
    }

    fn record_trace(&mut self, tick: usize) {
        let time = self.time_of_tick(tick);
        for (i, agent) in self.agents.iter().enumerate() {
            let alpha_o = self.cfg.online_tasks.iter().map(|s| agent.alpha_task(s.id)).collect();
            self.traces.push(TraceRow {
                tick,
                time,
                agent: i,
                team: self.cfg.teams[agent.team].id,
                position: agent.x,
                task: agent.label.clone(),
                alpha_p: agent.alpha_p(),
                alpha_sec: agent.alpha_sec(),
                alpha_o,
            });
        }
    }

    fn tick(&mut self, _t: usize, tick: usize) -> Result<(), MissionError> {
        self.record_trace(tick);
        let cfg = self.cfg;
        let now = self.time_of_tick(tick);
        let obstacles = cfg.obstacle_circles();
        let positions: Vec<Point2> = self.agents.iter().map(|a| a.x).collect();
        let mut inputs = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter().enumerate() {
            let control_err = |source| MissionError::Control { agent: i, time: now, source };
            let (u_ref, _) = reference_control(agent.x, &agent.alpha, &agent.tasks, &cfg.control).map_err(control_err)?;
            let soft = split_barrier_rows(&agent.barriers, agent.alpha_p(), |task| agent.alpha_task(task));
            let neighbors: Vec<Point2> =
                positions.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
            let out = security_filter(agent.x, now, u_ref, &soft, &neighbors, &obstacles, &cfg.control)
                .map_err(control_err)?;
            for row in soft.iter().filter(|r| r.barrier.is_active(now) && r.weight >= 1.0 - 1e-6) {
                let h = row.barrier.eval(agent.x, now).h;
                match row.barrier.purpose {
                    BarrierPurpose::CoObservation => min_opt(&mut self.metrics.min_h_co_observation, h),
                    BarrierPurpose::Regroup(_) => min_opt(&mut self.metrics.min_h_regroup, h),
                    BarrierPurpose::Collision => {}
                }
            }
            match out.status {
                QpStatus::Optimal => {}
                QpStatus::Fallback => self.metrics.qp_fallback_ticks += 1,
                QpStatus::Zero => self.metrics.qp_zero_ticks += 1,
            }
            self.controls.push(ControlRow {
                time: now,
                agent: i,
                u: out.u,
                active_barriers: out.active_barriers,
                min_h: out.min_h,
                qp_status: out.status,
            });
            inputs.push(out.u);
        }

        let (lo, hi) = cfg.workspace;
        let after = self.time_of_tick(tick + 1);
        for (i, u) in inputs.into_iter().enumerate() {
            let next = cfg.control.dynamics.step(self.agents[i].x, u, cfg.dt);
            self.agents[i].x = Point2::new(next.x.clamp(lo.x, hi.x), next.y.clamp(lo.y, hi.y));
        }
        for i in 0..self.agents.len() {
            let x = self.agents[i].x;
            for j in i + 1..self.agents.len() {
                min_opt(&mut self.metrics.min_pairwise_distance, x.distance(self.agents[j].x));
            }
            for o in &obstacles {
                min_opt(&mut self.metrics.min_obstacle_clearance, x.distance(o.center) - o.radius);
            }
            let region = cfg.forbidden.regions.iter().position(|p| point_in_polygon(x, p));
            if region.is_some() && self.agents[i].in_forbidden.is_none() {
                self.metrics.forbidden_entries += 1;
                self.event(after, "forbidden-entry", Some(i), None, json!({ "region": region, "position": point_json(x) }));
            }
            self.agents[i].in_forbidden = region;

            let Some(c) = self.agents[i].commitment.clone() else { continue };
            if !c.fulfilled && x.distance(c.location) <= cfg.fulfill_radius {
                let k = self.tasks.iter().position(|s| s.task.id == c.task).expect("committed task exists");
                self.set_status(k, TaskStatus::Fulfilled)?;
                self.metrics.fulfilled += 1;
                if let Some(cm) = self.agents[i].commitment.as_mut() {
                    cm.fulfilled = true;
                }
                self.event(after, "task-fulfilled", Some(i), Some(c.task), json!({ "distance": x.distance(c.location) }));
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<MissionOutput, MissionError> {
        let now = self.step_time(self.cfg.horizon);
        for k in 0..self.tasks.len() {
            let status = self.tasks[k].task.status();
            if status.is_terminal() {
                continue;
            }
            let id = self.tasks[k].task.id;
            let reason = match status {
                TaskStatus::Unassigned if self.tasks[k].task.appear_time > 0 && !self.tasks[k].announced => {
                    "appeared at the horizon"
                }
                TaskStatus::Unassigned => "outside every secured reachability region",
                _ => "not assigned before the horizon",
            };
            self.set_status(k, TaskStatus::Rejected)?;
            self.metrics.rejected += 1;
            let ever = self.tasks[k].ever_admissible;
            self.event(now, "task-rejected", None, Some(id), json!({ "reason": reason, "ever_admissible": ever }));
        }
        let tables = self.teams.iter().map(|t| (t.id, t.table.clone())).collect();
        Ok(MissionOutput {
            traces: self.traces,
            log: self.log,
            metrics: self.metrics,
            controls: self.controls,
            assignments: self.assignments,
            tables,
        })
    }
}

/// Runs the whole mission. ADMM non-convergence is logged and never aborts
/// the run; only internal inconsistencies surface as errors.
pub fn run_mission(cfg: &ScenarioConfig) -> Result<MissionOutput, MissionError> {
    Mission::new(cfg).run()
}
