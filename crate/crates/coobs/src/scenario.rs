//! Scenario files.
//!
//! A scenario is a TOML document with a fixed schema; unknown keys are
//! rejected. Points are `[x, y]` arrays in meters and times are integer
//! timesteps unless a field says otherwise.
//!
//! ```toml
//! seed = 7
//! v_max = 0.5
//! T = 20
//! timestep_duration = 1.0
//! dt = 0.01
//!
//! [workspace]
//! min = [0.0, 0.0]
//! max = [8.0, 8.0]
//!
//! [[forbidden]]
//! vertices = [[5.0, 0.5], [6.0, 0.5], [6.0, 1.5], [5.0, 1.5]]
//!
//! [[teams]]
//! id = 1
//! starts = [[1.0, 1.0]]
//! waypoints = [[1.2, 1.0], ...]   # exactly T entries
//!
//! [[co_observation_schedule]]
//! t = 8
//! teams = [1, 2]
//! r1 = 0.5
//! r2 = 1.0
//!
//! [[online_tasks]]
//! id = 1
//! appear_time = 3
//! location = [2.0, 1.8]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use coobs_core::assignment::{AdmmConfig, TaskId};
use coobs_core::control::{ClassK, ControlConfig, Obstacle};
use coobs_core::geometry::ConvexPolygon;
use coobs_core::graph::CommGraph;
use coobs_core::security::{CoObservation, CoObservationSchedule, ForbiddenSet, ReferenceTrajectory};
use coobs_core::{Matrix, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: schema error: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}:{line}: invalid `{field}`: {message}")]
    Invariant {
        path: PathBuf,
        field: String,
        line: usize,
        message: String,
    },
}

type P2 = [f64; 2];

fn pt(p: P2) -> Point2 {
    Point2::new(p[0], p[1])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: Option<String>,
    seed: u64,
    v_max: Spanned<f64>,
    #[serde(rename = "T")]
    horizon: Spanned<usize>,
    timestep_duration: Spanned<f64>,
    dt: Spanned<f64>,
    #[serde(default = "default_fulfill_radius")]
    fulfill_radius: Spanned<f64>,
    #[serde(default = "default_tube_radius")]
    tube_radius: Spanned<f64>,
    #[serde(default = "default_regroup_radius")]
    regroup_radius: Spanned<f64>,
    #[serde(default = "default_start_jitter")]
    start_jitter: Spanned<f64>,
    workspace: Spanned<WorkspaceFile>,
    #[serde(default)]
    obstacles: Vec<Spanned<PolygonFile>>,
    #[serde(default)]
    forbidden: Vec<Spanned<PolygonFile>>,
    teams: Vec<Spanned<TeamFile>>,
    #[serde(default)]
    co_observation_schedule: Vec<Spanned<CoObservationFile>>,
    #[serde(default)]
    online_tasks: Vec<Spanned<TaskFile>>,
    #[serde(default)]
    admm: Option<Spanned<AdmmFile>>,
    #[serde(default)]
    control: Option<Spanned<ControlFile>>,
}

fn default_fulfill_radius() -> Spanned<f64> {
    Spanned::new(0..0, 0.1)
}

fn default_tube_radius() -> Spanned<f64> {
    Spanned::new(0..0, 0.3)
}

fn default_start_jitter() -> Spanned<f64> {
    Spanned::new(0..0, 0.0)
}

fn default_regroup_radius() -> Spanned<f64> {
    Spanned::new(0..0, 0.5)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceFile {
    min: P2,
    max: P2,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolygonFile {
    vertices: Vec<P2>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TeamFile {
    id: usize,
    starts: Vec<P2>,
    waypoints: Vec<P2>,
    #[serde(default)]
    edges: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoObservationFile {
    t: usize,
    teams: (usize, usize),
    r1: f64,
    r2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    id: TaskId,
    appear_time: usize,
    location: P2,
    #[serde(default)]
    team: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdmmFile {
    rho: Option<f64>,
    gd_step: Option<f64>,
    inner_iterations: Option<usize>,
    max_outer: Option<usize>,
    residual_tol: Option<f64>,
    epsilon: Option<f64>,
    epsilon_prime: Option<f64>,
    big_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlFile {
    q: Option<[[f64; 2]; 2]>,
    clf_gain: Option<f64>,
    clf_cap: Option<f64>,
    cbf_gain: Option<f64>,
    big_m: Option<f64>,
    cbf_decay: Option<f64>,
    cbf_mu: Option<f64>,
    cbf_sigma: Option<f64>,
    r_safe: Option<f64>,
    eventually_floor: Option<f64>,
    barrier_radius_fraction: Option<f64>,
    barrier_speed_fraction: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Team {
    pub id: usize,
    pub starts: Vec<Point2>,
    pub trajectory: ReferenceTrajectory,
    pub graph: CommGraph,
    pub schedule: CoObservationSchedule,
}

impl Team {
    pub fn size(&self) -> usize {
        self.starts.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoObservationSpec {
    pub time: usize,
    pub teams: (usize, usize),
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub appear_time: usize,
    pub location: Point2,
    /// Team the task is offered to; `None` offers it to every team in id
    /// order.
    pub team: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub v_max: f64,
    pub horizon: usize,
    pub timestep_duration: f64,
    pub dt: f64,
    pub fulfill_radius: f64,
    pub tube_radius: f64,
    pub regroup_radius: f64,
    pub start_jitter: f64,
    pub workspace: (Point2, Point2),
    pub obstacles: Vec<ConvexPolygon>,
    pub forbidden: ForbiddenSet,
    pub teams: Vec<Team>,
    pub co_observations: Vec<CoObservationSpec>,
    pub online_tasks: Vec<TaskSpec>,
    pub admm: AdmmConfig,
    pub control: ControlConfig,
    /// Barrier radius as a fraction of the radius being checked.
    pub barrier_radius_fraction: f64,
    /// Closing speed of the eventually barriers, as a fraction of the
    /// per-axis input limit.
    pub barrier_speed_fraction: f64,
}

impl ScenarioConfig {
    pub fn team(&self, id: usize) -> Option<&Team> {
        self.teams.iter().find(|t| t.id == id)
    }

    pub fn agent_count(&self) -> usize {
        self.teams.iter().map(Team::size).sum()
    }

    /// Control ticks per timestep.
    pub fn ticks_per_step(&self) -> usize {
        (self.timestep_duration / self.dt).round() as usize
    }

    /// Closing speed used when building eventually barriers.
    pub fn barrier_speed(&self) -> f64 {
        self.barrier_speed_fraction * self.control.dynamics.box_limit()
    }

    /// Obstacles as clearance circles around each polygon.
    pub fn obstacle_circles(&self) -> Vec<Obstacle> {
        self.obstacles
            .iter()
            .map(|p| Obstacle {
                center: p.centroid(),
                radius: p.circumradius(),
            })
            .collect()
    }

    /// Start positions after the seeded jitter, in global agent order.
    pub fn jittered_starts(&self) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let j = self.start_jitter;
        self.teams
            .iter()
            .flat_map(|t| t.starts.iter().copied())
            .map(|p| {
                if j > 0.0 {
                    Point2::new(p.x + rng.gen_range(-j..=j), p.y + rng.gen_range(-j..=j))
                } else {
                    p
                }
            })
            .collect()
    }
}

struct Ctx<'a> {
    path: &'a Path,
    source: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: std::ops::Range<usize>) -> usize {
        if span.is_empty() && span.start == 0 {
            return 0;
        }
        self.source[..span.start.min(self.source.len())].matches('\n').count() + 1
    }

    fn invariant(&self, field: impl fmt::Display, span: std::ops::Range<usize>, message: impl fmt::Display) -> ScenarioError {
        ScenarioError::Invariant {
            path: self.path.to_path_buf(),
            field: field.to_string(),
            line: self.line(span),
            message: message.to_string(),
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&source, path)
}

/// Parses and validates scenario text; `path` is only used in messages.
pub fn parse_scenario(source: &str, path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let file: ScenarioFile = toml::from_str(source).map_err(|e| {
        let message = e.to_string();
        if message.contains("unknown field") || message.contains("missing field") {
            ScenarioError::Schema { path: path.to_path_buf(), message }
        } else {
            ScenarioError::Parse { path: path.to_path_buf(), message }
        }
    })?;
    let ctx = Ctx { path, source };
    build(file, &ctx)
}

fn positive(ctx: &Ctx, name: &str, v: &Spanned<f64>) -> Result<f64, ScenarioError> {
    let x = *v.get_ref();
    if !(x > 0.0 && x.is_finite()) {
        return Err(ctx.invariant(name, v.span(), format!("must be positive, got {x}")));
    }
    Ok(x)
}

fn polygon(ctx: &Ctx, field: String, p: &Spanned<PolygonFile>) -> Result<ConvexPolygon, ScenarioError> {
    let vertices = p.get_ref().vertices.iter().copied().map(pt).collect();
    ConvexPolygon::new(vertices).map_err(|e| ctx.invariant(field, p.span(), e))
}

fn build(file: ScenarioFile, ctx: &Ctx) -> Result<ScenarioConfig, ScenarioError> {
    let v_max = positive(ctx, "v_max", &file.v_max)?;
    let horizon = *file.horizon.get_ref();
    if horizon == 0 {
        return Err(ctx.invariant("T", file.horizon.span(), "must be at least 1"));
    }
    let duration = positive(ctx, "timestep_duration", &file.timestep_duration)?;
    let dt = positive(ctx, "dt", &file.dt)?;
    let ticks = duration / dt;
    if (ticks - ticks.round()).abs() > 1e-9 * ticks {
        return Err(ctx.invariant("dt", file.dt.span(), "must divide timestep_duration"));
    }
    let fulfill_radius = positive(ctx, "fulfill_radius", &file.fulfill_radius)?;
    let tube_radius = positive(ctx, "tube_radius", &file.tube_radius)?;
    let regroup_radius = positive(ctx, "regroup_radius", &file.regroup_radius)?;
    let start_jitter = *file.start_jitter.get_ref();
    if start_jitter.is_nan() || start_jitter < 0.0 {
        return Err(ctx.invariant("start_jitter", file.start_jitter.span(), "must be non-negative"));
    }

    let ws = file.workspace.get_ref();
    let workspace = (pt(ws.min), pt(ws.max));
    if !(workspace.0.x < workspace.1.x && workspace.0.y < workspace.1.y) {
        return Err(ctx.invariant("workspace", file.workspace.span(), "min must lie below max on both axes"));
    }
    let inside = |p: Point2| p.x >= workspace.0.x && p.x <= workspace.1.x && p.y >= workspace.0.y && p.y <= workspace.1.y;

    let obstacles = file
        .obstacles
        .iter()
        .enumerate()
        .map(|(k, p)| polygon(ctx, format!("obstacles[{k}]"), p))
        .collect::<Result<Vec<_>, _>>()?;
    let forbidden = ForbiddenSet::new(
        file.forbidden
            .iter()
            .enumerate()
            .map(|(k, p)| polygon(ctx, format!("forbidden[{k}]"), p))
            .collect::<Result<Vec<_>, _>>()?,
    );

    if file.teams.is_empty() {
        return Err(ScenarioError::Schema {
            path: ctx.path.to_path_buf(),
            message: "at least one team is required".into(),
        });
    }
    let mut teams = Vec::new();
    for (k, spanned) in file.teams.iter().enumerate() {
        let tf = spanned.get_ref();
        let field = |name: &str| format!("teams[{k}].{name}");
        let span = spanned.span();
        if teams.iter().any(|t: &Team| t.id == tf.id) {
            return Err(ctx.invariant(field("id"), span, format!("duplicate team id {}", tf.id)));
        }
        if tf.starts.is_empty() {
            return Err(ctx.invariant(field("starts"), span, "team needs at least one agent"));
        }
        let starts: Vec<Point2> = tf.starts.iter().copied().map(pt).collect();
        if let Some(p) = starts.iter().find(|p| !inside(**p)) {
            return Err(ctx.invariant(field("starts"), span, format!("start {p:?} lies outside the workspace")));
        }
        if tf.waypoints.len() != horizon {
            return Err(ctx.invariant(
                field("waypoints"),
                span.clone(),
                format!("expected T = {horizon} waypoints, got {}", tf.waypoints.len()),
            ));
        }
        let trajectory = ReferenceTrajectory::new(tf.waypoints.iter().copied().map(pt).collect(), duration)
            .map_err(|e| ctx.invariant(field("waypoints"), span.clone(), e))?;
        for (i, &s) in starts.iter().enumerate() {
            trajectory
                .check_followable(Some(s), v_max)
                .map_err(|e| ctx.invariant(field("waypoints"), span.clone(), format!("from start {i}: {e}")))?;
        }
        let n = starts.len();
        let graph = match &tf.edges {
            Some(edges) => CommGraph::new(n, edges),
            None => CommGraph::complete(n),
        }
        .map_err(|e| ctx.invariant(field("edges"), span.clone(), e))?;
        teams.push(Team {
            id: tf.id,
            starts,
            trajectory,
            graph,
            schedule: CoObservationSchedule::default(),
        });
    }
    teams.sort_by_key(|t| t.id);

    let mut co_observations = Vec::new();
    for (k, spanned) in file.co_observation_schedule.iter().enumerate() {
        let c = spanned.get_ref();
        let field = format!("co_observation_schedule[{k}]");
        let span = spanned.span();
        if c.t == 0 || c.t > horizon {
            return Err(ctx.invariant(field, span, format!("time {} lies outside 1..={horizon}", c.t)));
        }
        let (a, b) = c.teams;
        let (Some(ta), Some(tb)) = (teams.iter().find(|t| t.id == a), teams.iter().find(|t| t.id == b)) else {
            return Err(ctx.invariant(field, span, format!("unknown team in pair ({a}, {b})")));
        };
        if a == b {
            return Err(ctx.invariant(field, span, "a team cannot co-observe itself"));
        }
        if !(c.r1 > 0.0 && c.r2 > 0.0) {
            return Err(ctx.invariant(field, span, "r1 and r2 must be positive"));
        }
        let gap = ta.trajectory.at(c.t).distance(tb.trajectory.at(c.t));
        if gap > c.r2 {
            return Err(ctx.invariant(
                field,
                span,
                format!("waypoints of teams {a} and {b} at t={} are {gap:.3} m apart, more than r2 = {}", c.t, c.r2),
            ));
        }
        co_observations.push(CoObservationSpec {
            time: c.t,
            teams: (a, b),
            r1: c.r1,
            r2: c.r2,
        });
    }
    co_observations.sort_by_key(|c| c.time);
    for team in &mut teams {
        let entries = co_observations
            .iter()
            .filter_map(|c| {
                let partner = if c.teams.0 == team.id {
                    c.teams.1
                } else if c.teams.1 == team.id {
                    c.teams.0
                } else {
                    return None;
                };
                Some(CoObservation {
                    time: c.time,
                    location: team.trajectory.at(c.time),
                    partner,
                    r1: c.r1,
                    r2: c.r2,
                })
            })
            .collect();
        team.schedule = CoObservationSchedule::new(entries)
            .map_err(|e| ctx.invariant("co_observation_schedule", 0..0, format!("team {}: {e}", team.id)))?;
    }

    let mut online_tasks: Vec<TaskSpec> = Vec::new();
    for (k, spanned) in file.online_tasks.iter().enumerate() {
        let t = spanned.get_ref();
        let field = format!("online_tasks[{k}]");
        let span = spanned.span();
        if online_tasks.iter().any(|o| o.id == t.id) {
            return Err(ctx.invariant(field, span, format!("duplicate task id {}", t.id)));
        }
        if t.appear_time > horizon {
            return Err(ctx.invariant(field, span, format!("appear_time {} exceeds T = {horizon}", t.appear_time)));
        }
        let location = pt(t.location);
        if !location.is_finite() {
            return Err(ctx.invariant(field, span, "location must be finite"));
        }
        if let Some(team) = t.team {
            if !teams.iter().any(|tm| tm.id == team) {
                return Err(ctx.invariant(field, span, format!("unknown team {team}")));
            }
        }
        online_tasks.push(TaskSpec {
            id: t.id,
            appear_time: t.appear_time,
            location,
            team: t.team,
        });
    }

    let diameter = workspace.0.distance(workspace.1);
    let mut admm = AdmmConfig::for_workspace_diameter(diameter);
    let admm_span = file.admm.as_ref().map(|a| a.span()).unwrap_or(0..0);
    if let Some(a) = file.admm.as_ref().map(|a| a.get_ref()) {
        admm.rho = a.rho.unwrap_or(admm.rho);
        admm.gd_step = a.gd_step.or(admm.gd_step);
        admm.inner_iterations = a.inner_iterations.unwrap_or(admm.inner_iterations);
        admm.max_outer = a.max_outer.unwrap_or(admm.max_outer);
        admm.residual_tol = a.residual_tol.unwrap_or(admm.residual_tol);
        admm.epsilon = a.epsilon.unwrap_or(admm.epsilon);
        admm.epsilon_prime = a.epsilon_prime.unwrap_or(admm.epsilon_prime);
        admm.big_m = a.big_m.unwrap_or(2.5 / admm.epsilon);
    }
    admm.validate().map_err(|e| ctx.invariant("admm", admm_span, e))?;

    let mut control = ControlConfig::new(v_max).map_err(|e| ctx.invariant("v_max", file.v_max.span(), e))?;
    control.dt = dt;
    let mut barrier_radius_fraction = 0.8;
    let mut barrier_speed_fraction = 0.9;
    control.eventually_floor = 1.0;
    let control_span = file.control.as_ref().map(|c| c.span()).unwrap_or(0..0);
    if let Some(c) = file.control.as_ref().map(|c| c.get_ref()) {
        if let Some(q) = c.q {
            control.q = Matrix::from_rows(&q);
        }
        control.clf_gain = match (c.clf_gain, c.clf_cap) {
            (Some(k), Some(cap)) => ClassK::Saturating { k, cap },
            (Some(k), None) => ClassK::Linear(k),
            (None, Some(cap)) => ClassK::Saturating { k: 1.0, cap },
            (None, None) => control.clf_gain,
        };
        control.cbf_gain = c.cbf_gain.unwrap_or(control.cbf_gain);
        control.big_m = c.big_m.unwrap_or(control.big_m);
        control.cbf_decay = c.cbf_decay.unwrap_or(control.cbf_decay);
        control.cbf_mu = c.cbf_mu.unwrap_or(control.cbf_mu);
        control.cbf_sigma = c.cbf_sigma.unwrap_or(control.cbf_sigma);
        control.r_safe = c.r_safe.unwrap_or(control.r_safe);
        control.eventually_floor = c.eventually_floor.unwrap_or(control.eventually_floor);
        barrier_radius_fraction = c.barrier_radius_fraction.unwrap_or(barrier_radius_fraction);
        barrier_speed_fraction = c.barrier_speed_fraction.unwrap_or(barrier_speed_fraction);
    }
    control.validate(duration).map_err(|e| ctx.invariant("control", control_span.clone(), e))?;
    if !(barrier_radius_fraction > 0.0 && barrier_radius_fraction <= 1.0) {
        return Err(ctx.invariant("control.barrier_radius_fraction", control_span, "must lie in (0, 1]"));
    }
    if !(barrier_speed_fraction > 0.0 && barrier_speed_fraction <= 1.0) {
        return Err(ctx.invariant("control.barrier_speed_fraction", control_span, "must lie in (0, 1]"));
    }

    Ok(ScenarioConfig {
        name: file.name.unwrap_or_else(|| {
            ctx.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        }),
        seed: file.seed,
        v_max,
        horizon,
        timestep_duration: duration,
        dt,
        fulfill_radius,
        tube_radius,
        regroup_radius,
        start_jitter,
        workspace,
        obstacles,
        forbidden,
        teams,
        co_observations,
        online_tasks,
        admm,
        control,
        barrier_radius_fraction,
        barrier_speed_fraction,
    })
}
