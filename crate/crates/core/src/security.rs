//! Regroup lookup tables and online-task admissibility.
//!
//! A robot that leaves its team's reference trajectory at waypoint `q_t`
//! and rejoins at `q_{t_r}` can be anywhere inside the focal-sum ellipse
//! with foci `q_t`, `q_{t_r}` and `2a = v_max · (t_r − t) · Δ`. The deviation
//! is secured when that ellipse misses every forbidden region.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::assignment::TaskId;
use crate::geometry::{ellipse_intersects_polygon, ConvexPolygon, FocalEllipse, BOUNDARY_TOL};
use crate::{Error, Point2, Result};

/// Waypoints `q_1 … q_T`; `q_t` is due at time `t · timestep_duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    waypoints: Vec<Point2>,
    timestep_duration: f64,
}

impl ReferenceTrajectory {
    pub fn new(waypoints: Vec<Point2>, timestep_duration: f64) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidParameter {
                name: "waypoints",
                reason: "trajectory needs at least one waypoint".into(),
            });
        }
        if !(timestep_duration > 0.0) {
            return Err(Error::InvalidParameter {
                name: "timestep_duration",
                reason: format!("must be positive, got {timestep_duration}"),
            });
        }
        if let Some(i) = waypoints.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "waypoints",
                reason: format!("waypoint {} is not finite", i + 1),
            });
        }
        Ok(Self {
            waypoints,
            timestep_duration,
        })
    }

    /// Rejects consecutive waypoints farther apart than one step of travel.
    /// `start`, if given, is checked against `q_1`.
    pub fn check_followable(&self, start: Option<Point2>, v_max: f64) -> Result<()> {
        let reach = v_max * self.timestep_duration + BOUNDARY_TOL;
        let mut prev = start;
        for (i, &q) in self.waypoints.iter().enumerate() {
            if let Some(p) = prev {
                let d = p.distance(q);
                if d > reach {
                    return Err(Error::InvalidParameter {
                        name: "waypoints",
                        reason: format!(
                            "step into waypoint {} is {d} m, more than v_max * timestep_duration = {}",
                            i + 1,
                            v_max * self.timestep_duration
                        ),
                    });
                }
            }
            prev = Some(q);
        }
        Ok(())
    }

    /// `T`.
    pub fn horizon(&self) -> usize {
        self.waypoints.len()
    }

    pub fn timestep_duration(&self) -> f64 {
        self.timestep_duration
    }

    /// `q_t` for `1 ≤ t ≤ T`.
    pub fn at(&self, t: usize) -> Point2 {
        assert!(t >= 1 && t <= self.horizon(), "timestep {t} outside 1..={}", self.horizon());
        self.waypoints[t - 1]
    }

    pub fn waypoints(&self) -> &[Point2] {
        &self.waypoints
    }
}

/// Regions no robot may enter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForbiddenSet {
    pub regions: Vec<ConvexPolygon>,
}

impl ForbiddenSet {
    pub fn new(regions: Vec<ConvexPolygon>) -> Self {
        Self { regions }
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

/// Reachability ellipse for leaving `x1` at step `t1` and rejoining `x2` at
/// step `t2`.
pub fn deviation_ellipse(
    x1: Point2,
    t1: usize,
    x2: Point2,
    t2: usize,
    v_max: f64,
    timestep_duration: f64,
) -> Result<FocalEllipse> {
    if t2 <= t1 {
        return Err(Error::InvalidParameter {
            name: "t2",
            reason: format!("rejoin step {t2} must come after deviation step {t1}"),
        });
    }
    let two_a = v_max * (t2 - t1) as f64 * timestep_duration;
    let distance = x1.distance(x2);
    if two_a < distance - BOUNDARY_TOL {
        return Err(Error::Unreachable { distance, reach: two_a });
    }
    FocalEllipse::new(x1, x2, two_a)
}

/// Whether the deviation from `(x1, t1)` to `(x2, t2)` keeps the whole
/// reachable set clear of forbidden regions.
pub fn deviation_secured(
    x1: Point2,
    t1: usize,
    x2: Point2,
    t2: usize,
    forbidden: &ForbiddenSet,
    v_max: f64,
    timestep_duration: f64,
) -> Result<bool> {
    let e = deviation_ellipse(x1, t1, x2, t2, v_max, timestep_duration)?;
    Ok(!forbidden.regions.iter().any(|poly| ellipse_intersects_polygon(&e, poly)))
}

/// Latest secured regroup step for each waypoint. `t_r == t` means no
/// deviation is allowed from `q_t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegroupLookupTable {
    entries: Vec<usize>,
}

impl RegroupLookupTable {
    pub fn from_entries(entries: Vec<usize>) -> Self {
        Self { entries }
    }

    /// `t_r` for `1 ≤ t ≤ T`.
    pub fn get(&self, t: usize) -> usize {
        self.entries[t - 1]
    }

    pub fn horizon(&self) -> usize {
        self.entries.len()
    }

    /// `(t, t_r)` pairs in order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().enumerate().map(|(i, &tr)| (i + 1, tr))
    }

    /// `timestep,t_r` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestep,t_r\n");
        for (t, tr) in self.iter() {
            let _ = writeln!(out, "{t},{tr}");
        }
        out
    }
}

/// Grows the rejoin step `j` from `i + 1` while the section `(q_i, q_j)` is
/// secured and stores `j − 1`, capped at `T`. An unreachable rejoin counts
/// as unsecured.
pub fn build_lookup_table(traj: &ReferenceTrajectory, forbidden: &ForbiddenSet, v_max: f64) -> RegroupLookupTable {
    let horizon = traj.horizon();
    let dt = traj.timestep_duration();
    let entries = (1..=horizon)
        .map(|i| {
            let mut j = i + 1;
            while j <= horizon
                && deviation_secured(traj.at(i), i, traj.at(j), j, forbidden, v_max, dt).unwrap_or(false)
            {
                j += 1;
            }
            (j - 1).min(horizon)
        })
        .collect();
    RegroupLookupTable { entries }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskStatus {
    Unassigned,
    Admissible { regroup: usize },
    Assigned { agent: usize, regroup: usize, shadow: bool },
    Fulfilled,
    Abandoned,
    Rejected,
}

impl TaskStatus {
    pub fn name(&self) -> &'static str {
        match self {
            TaskStatus::Unassigned => "unassigned",
            TaskStatus::Admissible { .. } => "admissible",
            TaskStatus::Assigned { .. } => "assigned",
            TaskStatus::Fulfilled => "fulfilled",
            TaskStatus::Abandoned => "abandoned",
            TaskStatus::Rejected => "rejected",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, TaskStatus::Fulfilled | TaskStatus::Abandoned | TaskStatus::Rejected)
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineTask {
    pub id: TaskId,
    pub appear_time: usize,
    pub location: Point2,
    status: TaskStatus,
}

impl OnlineTask {
    pub fn new(id: TaskId, appear_time: usize, location: Point2) -> Self {
        Self {
            id,
            appear_time,
            location,
            status: TaskStatus::Unassigned,
        }
    }

    pub fn status(&self) -> TaskStatus {
        self.status
    }

    /// Moves along unassigned → admissible → assigned → {fulfilled,
    /// abandoned}; tasks that never get assigned may be rejected.
    pub fn transition(&mut self, next: TaskStatus) -> Result<()> {
        use TaskStatus::*;
        let ok = matches!(
            (self.status, next),
            (Unassigned, Admissible { .. })
                | (Admissible { .. }, Admissible { .. })
                | (Admissible { .. }, Assigned { .. })
                | (Assigned { .. }, Fulfilled)
                | (Assigned { .. }, Abandoned)
                | (Unassigned, Rejected)
                | (Admissible { .. }, Rejected)
        );
        if !ok {
            return Err(Error::InvalidTransition {
                from: self.status.name(),
                to: next.name(),
            });
        }
        self.status = next;
        Ok(())
    }
}

/// `Some(t_r)` when the task lies within the secured reach of the current
/// waypoint, i.e. `d(q_t, x_O) + d(q_{t_r}, x_O) ≤ v_max (t_r − t) Δ`.
pub fn online_task_admissible(
    task: &OnlineTask,
    q_t: Point2,
    t: usize,
    table: &RegroupLookupTable,
    traj: &ReferenceTrajectory,
    v_max: f64,
) -> Option<usize> {
    let t_r = table.get(t);
    if t_r <= t {
        return None;
    }
    let detour = q_t.distance(task.location) + traj.at(t_r).distance(task.location);
    let reach = v_max * (t_r - t) as f64 * traj.timestep_duration();
    (detour <= reach + BOUNDARY_TOL).then_some(t_r)
}

/// A scheduled meeting with another team.
#[derive(Debug, Clone, PartialEq)]
pub struct CoObservation {
    pub time: usize,
    pub location: Point2,
    pub partner: usize,
    /// Allowed offset from `location`.
    pub r1: f64,
    /// Allowed distance between the two parties.
    pub r2: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoObservationSchedule {
    entries: Vec<CoObservation>,
}

impl CoObservationSchedule {
    /// Entries must have strictly increasing times and positive radii.
    pub fn new(entries: Vec<CoObservation>) -> Result<Self> {
        for (k, e) in entries.iter().enumerate() {
            if !(e.r1 > 0.0 && e.r2 > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "co_observations",
                    reason: format!("entry at t={} needs positive r1 and r2", e.time),
                });
            }
            if k > 0 && entries[k - 1].time >= e.time {
                return Err(Error::InvalidParameter {
                    name: "co_observations",
                    reason: format!("times must increase strictly, got {} then {}", entries[k - 1].time, e.time),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[CoObservation] {
        &self.entries
    }

    /// First entry at or after step `t`.
    pub fn next_at_or_after(&self, t: usize) -> Option<&CoObservation> {
        self.entries.iter().find(|e| e.time >= t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn straight(n: usize) -> ReferenceTrajectory {
        let pts = (1..=n).map(|t| Point2::new(0.5 * t as f64, 0.0)).collect();
        ReferenceTrajectory::new(pts, 1.0).unwrap()
    }

    fn square(cx: f64, cy: f64, half: f64) -> ConvexPolygon {
        ConvexPolygon::rectangle(Point2::new(cx - half, cy - half), Point2::new(cx + half, cy + half)).unwrap()
    }

    #[test]
    fn far_region_is_secured() {
        let f = ForbiddenSet::new(vec![square(50.0, 50.0, 1.0)]);
        assert!(deviation_secured(Point2::new(0.0, 0.0), 1, Point2::new(1.0, 0.0), 3, &f, 1.0, 1.0).unwrap());
    }

    #[test]
    fn region_on_start_is_not_secured() {
        let f = ForbiddenSet::new(vec![square(0.0, 0.0, 0.5)]);
        assert!(!deviation_secured(Point2::new(0.0, 0.0), 1, Point2::new(1.0, 0.0), 3, &f, 1.0, 1.0).unwrap());
    }

    #[test]
    fn unreachable_rejoin_is_an_error() {
        let f = ForbiddenSet::default();
        let r = deviation_secured(Point2::new(0.0, 0.0), 1, Point2::new(5.0, 0.0), 2, &f, 1.0, 1.0);
        assert!(matches!(r, Err(Error::Unreachable { .. })));
    }

    #[test]
    fn empty_forbidden_set_gives_full_horizon() {
        let table = build_lookup_table(&straight(10), &ForbiddenSet::default(), 0.5);
        assert!(table.iter().all(|(_, tr)| tr == 10));
    }

    #[test]
    fn region_on_corridor_blocks_deviation() {
        let f = ForbiddenSet::new(vec![square(2.0, 0.0, 0.1)]);
        let table = build_lookup_table(&straight(10), &f, 0.5);
        // q_3 = (1.5, 0), q_4 = (2.0, 0) sits inside the region
        assert_eq!(table.get(4), 4);
        assert_eq!(table.get(3), 3);
    }

    #[test]
    fn admissibility_examples() {
        let traj = straight(10);
        let table = build_lookup_table(&traj, &ForbiddenSet::default(), 0.5);
        let on_path = OnlineTask::new(1, 1, traj.at(2));
        assert_eq!(online_task_admissible(&on_path, traj.at(2), 2, &table, &traj, 0.5), Some(10));
        let far = OnlineTask::new(2, 1, Point2::new(0.0, 40.0));
        assert_eq!(online_task_admissible(&far, traj.at(2), 2, &table, &traj, 0.5), None);
        let last = OnlineTask::new(3, 1, traj.at(10));
        assert_eq!(online_task_admissible(&last, traj.at(10), 10, &table, &traj, 0.5), None);
    }

    #[test]
    fn admissible_on_exact_boundary() {
        let traj = ReferenceTrajectory::new(vec![Point2::new(0.0, 0.0), Point2::new(0.0, 0.0), Point2::new(0.0, 0.0)], 1.0).unwrap();
        let table = RegroupLookupTable::from_entries(vec![3, 3, 3]);
        // detour 2 * 0.5 = 1.0 equals v_max * 2 steps
        let task = OnlineTask::new(1, 1, Point2::new(0.5, 0.0));
        assert_eq!(online_task_admissible(&task, traj.at(1), 1, &table, &traj, 0.5), Some(3));
    }

    #[test]
    fn status_transitions() {
        let mut task = OnlineTask::new(1, 1, Point2::new(0.0, 0.0));
        assert!(task.transition(TaskStatus::Fulfilled).is_err());
        task.transition(TaskStatus::Admissible { regroup: 5 }).unwrap();
        task.transition(TaskStatus::Assigned { agent: 0, regroup: 5, shadow: false }).unwrap();
        task.transition(TaskStatus::Fulfilled).unwrap();
        assert!(task.transition(TaskStatus::Abandoned).is_err());
        let mut never = OnlineTask::new(2, 1, Point2::new(0.0, 0.0));
        never.transition(TaskStatus::Rejected).unwrap();
        assert!(never.transition(TaskStatus::Admissible { regroup: 2 }).is_err());
    }

    #[test]
    fn followability() {
        let traj = ReferenceTrajectory::new(vec![Point2::new(0.0, 0.0), Point2::new(0.6, 0.0)], 1.0).unwrap();
        assert!(traj.check_followable(None, 0.5).is_err());
        assert!(traj.check_followable(None, 0.6).is_ok());
    }

    #[test]
    fn schedule_must_increase() {
        let e = |time| CoObservation { time, location: Point2::new(0.0, 0.0), partner: 1, r1: 0.5, r2: 1.0 };
        assert!(CoObservationSchedule::new(vec![e(8), e(14)]).is_ok());
        assert!(CoObservationSchedule::new(vec![e(8), e(8)]).is_err());
    }

    #[test]
    fn csv_export() {
        let table = RegroupLookupTable::from_entries(vec![3, 3, 3]);
        assert_eq!(table.to_csv(), "timestep,t_r\n1,3\n2,3\n3,3\n");
    }
}
