//! Post-hoc security audit of a mission log and its traces.

use std::collections::BTreeMap;
use std::fmt;

use coobs_core::geometry::point_in_polygon;
use coobs_core::Point2;
use serde::Serialize;

use crate::mission::{SimEventLog, TraceRow};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub time: f64,
    pub agent: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{} {:<40} {} ({} checked)", c.id, c.name, if c.passed { "PASS" } else { "FAIL" }, c.checked)?;
            if let Some(v) = &c.first_violation {
                let agent = v.agent.map_or_else(|| "-".to_string(), |a| a.to_string());
                write!(f, ": first violation at t={} agent={} {}", v.time, agent, v.message)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

struct Check {
    id: &'static str,
    name: &'static str,
    checked: usize,
    first: Option<Violation>,
}

impl Check {
    fn new(id: &'static str, name: &'static str) -> Self {
        Self { id, name, checked: 0, first: None }
    }

    fn observe(&mut self, ok: bool, time: f64, agent: Option<usize>, message: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.first.is_none() {
            self.first = Some(Violation { time, agent, message: message() });
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            id: self.id,
            name: self.name,
            passed: self.first.is_none(),
            checked: self.checked,
            first_violation: self.first,
        }
    }
}

/// Positions indexed by tick, then by agent.
struct Positions {
    by_tick: BTreeMap<usize, BTreeMap<usize, (usize, Point2)>>,
}

impl Positions {
    fn new(traces: &[TraceRow]) -> Self {
        let mut by_tick: BTreeMap<usize, BTreeMap<usize, (usize, Point2)>> = BTreeMap::new();
        for r in traces {
            by_tick.entry(r.tick).or_default().insert(r.agent, (r.team, r.position));
        }
        Self { by_tick }
    }

    fn at(&self, tick: usize) -> impl Iterator<Item = (usize, usize, Point2)> + '_ {
        self.by_tick
            .get(&tick)
            .into_iter()
            .flat_map(|m| m.iter().map(|(&a, &(team, p))| (a, team, p)))
    }

    fn of(&self, tick: usize, agent: usize) -> Option<Point2> {
        self.by_tick.get(&tick)?.get(&agent).map(|&(_, p)| p)
    }
}

fn detail_usize(e: &crate::mission::Event, key: &str) -> Option<usize> {
    e.detail.get(key)?.as_u64().map(|v| v as usize)
}

/// Checks V1–V5 against `traces`.
pub fn verify_log(log: &SimEventLog, traces: &[TraceRow], cfg: &ScenarioConfig) -> VerificationReport {
    let n = cfg.ticks_per_step();
    let step_time = |t: usize| (t * n) as f64 * cfg.dt;
    let positions = Positions::new(traces);

    let mut v1 = Check::new("V1", "no trace point in a forbidden region");
    for r in traces {
        let hit = cfg.forbidden.regions.iter().position(|p| point_in_polygon(r.position, p));
        v1.observe(hit.is_none(), r.time, Some(r.agent), || {
            format!("({}, {}) inside forbidden region {}", r.position.x, r.position.y, hit.unwrap_or(0))
        });
    }

    let mut v2 = Check::new("V2", "one agent per team on the reference tube");
    for t in 1..=cfg.horizon {
        for team in &cfg.teams {
            let q = team.trajectory.at(t);
            let best = positions
                .at(t * n)
                .filter(|(_, tm, _)| *tm == team.id)
                .map(|(a, _, p)| (a, p.distance(q)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let ok = best.is_some_and(|(_, d)| d <= cfg.tube_radius);
            v2.observe(ok, step_time(t), best.map(|b| b.0), || match best {
                Some((_, d)) => format!("team {}: nearest agent {d:.3} m from q_{t}", team.id),
                None => format!("team {}: no trace at step {t}", team.id),
            });
        }
    }

    let mut v3 = Check::new("V3", "co-observations met within r1");
    for c in &cfg.co_observations {
        let near = |id: usize| -> Vec<(usize, Point2)> {
            let q = cfg.team(id).expect("validated team").trajectory.at(c.time);
            positions
                .at(c.time * n)
                .filter(|(_, tm, p)| *tm == id && p.distance(q) <= c.r1)
                .map(|(a, _, p)| (a, p))
                .collect()
        };
        let (a, b) = (near(c.teams.0), near(c.teams.1));
        let ok = a.iter().any(|(_, pa)| b.iter().any(|(_, pb)| pa.distance(*pb) <= 2.0 * c.r1));
        v3.observe(ok, step_time(c.time), a.first().or(b.first()).map(|x| x.0), || {
            format!("teams {} and {} not within r1 = {} of their waypoints", c.teams.0, c.teams.1, c.r1)
        });
    }

    let mut v4 = Check::new("V4", "deviating agents back by t_r");
    let mut v5 = Check::new("V5", "assignments preceded by admissibility");
    let events = log.events();
    for (idx, e) in events.iter().enumerate() {
        if e.kind != "task-assigned" {
            continue;
        }
        let regroup = detail_usize(e, "regroup");
        let step = detail_usize(e, "step");
        let team = detail_usize(e, "team");
        let shadow = e.detail.get("shadow").and_then(|v| v.as_bool()).unwrap_or(false);

        let admitted = events[..idx].iter().any(|p| {
            p.kind == "task-admissible"
                && p.task == e.task
                && detail_usize(p, "team") == team
                && detail_usize(p, "step") == step
                && detail_usize(p, "regroup") == regroup
                && matches!((step, regroup), (Some(s), Some(r)) if s < r && r <= cfg.horizon)
        });
        v5.observe(admitted, e.t, e.agent, || {
            format!("task {:?} assigned without a matching admissibility event", e.task)
        });

        if shadow {
            continue;
        }
        let (Some(agent), Some(t_r), Some(team_id)) = (e.agent, regroup, team) else {
            v4.observe(false, e.t, e.agent, || "assignment record lacks agent, team or regroup".into());
            continue;
        };
        let Some(team_cfg) = cfg.team(team_id).filter(|_| t_r >= 1 && t_r <= cfg.horizon) else {
            v4.observe(false, e.t, Some(agent), || format!("invalid team {team_id} or regroup {t_r}"));
            continue;
        };
        let q = team_cfg.trajectory.at(t_r);
        let d = positions.of(t_r * n, agent).map(|p| p.distance(q));
        v4.observe(d.is_some_and(|d| d <= cfg.regroup_radius), step_time(t_r), Some(agent), || match d {
            Some(d) => format!("{d:.3} m from q_{t_r} for task {:?}", e.task),
            None => format!("no trace at t_r = {t_r}"),
        });
    }

    VerificationReport {
        checks: vec![v1.finish(), v2.finish(), v3.finish(), v4.finish(), v5.finish()],
    }
}
