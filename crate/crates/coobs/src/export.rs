//! Output files of a mission run and their readers.

use std::fs;
use std::path::{Path, PathBuf};

use coobs_core::Point2;

use crate::mission::{MissionOutput, SimEventLog, TraceRow};
use crate::scenario::ScenarioConfig;

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const EVENTS: &str = "events.json";
pub const ASSIGNMENT: &str = "assignment.csv";
pub const METRICS: &str = "metrics.json";
pub const CONTROL: &str = "control.csv";

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExportError + '_ {
    move |source| ExportError::Csv { path: path.to_path_buf(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> ExportError + '_ {
    move |source| ExportError::Json { path: path.to_path_buf(), source }
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), ExportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Header of `trajectories.csv` for a scenario.
pub fn trajectory_header(cfg: &ScenarioConfig) -> Vec<String> {
    let mut header: Vec<String> = ["time", "agent", "team", "x", "y", "task", "alpha_P", "alpha_sec"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(cfg.online_tasks.iter().map(|t| format!("alpha_O{}", t.id)));
    header
}

/// Writes every output file into `out_dir`, creating it if needed.
pub fn export_outputs(output: &MissionOutput, cfg: &ScenarioConfig, out_dir: &Path) -> Result<(), ExportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    write_csv(
        &out_dir.join(TRAJECTORIES),
        &trajectory_header(cfg),
        output.traces.iter().map(|r| {
            let mut row = vec![
                r.time.to_string(),
                r.agent.to_string(),
                r.team.to_string(),
                r.position.x.to_string(),
                r.position.y.to_string(),
                r.task.clone(),
                r.alpha_p.to_string(),
                r.alpha_sec.to_string(),
            ];
            row.extend(r.alpha_o.iter().map(f64::to_string));
            row
        }),
    )?;

    write_json(&out_dir.join(EVENTS), &output.log)?;
    write_json(&out_dir.join(METRICS), &output.metrics)?;

    let header = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    write_csv(
        &out_dir.join(ASSIGNMENT),
        &header(&["timestep", "team", "row", "task", "alpha"]),
        output.assignments.iter().map(|a| {
            vec![a.timestep.to_string(), a.team.to_string(), a.row.clone(), a.task.clone(), a.alpha.to_string()]
        }),
    )?;

    write_csv(
        &out_dir.join(CONTROL),
        &header(&["time", "agent", "u_x", "u_y", "active_barriers", "min_h", "qp_status"]),
        output.controls.iter().map(|c| {
            vec![
                c.time.to_string(),
                c.agent.to_string(),
                c.u.x.to_string(),
                c.u.y.to_string(),
                c.active_barriers.to_string(),
                c.min_h.to_string(),
                c.qp_status.as_str().to_string(),
            ]
        }),
    )?;

    for (team, table) in &output.tables {
        let path = out_dir.join(lookup_table_file(*team));
        fs::write(&path, table.to_csv()).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn lookup_table_file(team: usize) -> String {
    format!("lookup_team{team}.csv")
}

pub fn read_events(path: &Path) -> Result<SimEventLog, ExportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let log: SimEventLog = serde_json::from_str(&text).map_err(json_err(path))?;
    if log.events().windows(2).any(|w| w[1].t < w[0].t) {
        return Err(ExportError::Format {
            path: path.to_path_buf(),
            message: "event timestamps decrease".into(),
        });
    }
    Ok(log)
}

/// Reads `trajectories.csv`; the tick index is recovered as `round(time / dt)`.
pub fn read_traces(path: &Path, cfg: &ScenarioConfig) -> Result<Vec<TraceRow>, ExportError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let expected = trajectory_header(cfg);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(ExportError::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let bad = |field: &str| ExportError::Format {
            path: path.to_path_buf(),
            message: format!("row {}: bad `{field}`", line + 2),
        };
        let float = |k: usize, name: &str| record[k].parse::<f64>().map_err(|_| bad(name));
        let int = |k: usize, name: &str| record[k].parse::<usize>().map_err(|_| bad(name));
        let time = float(0, "time")?;
        let alpha_o = (8..record.len()).map(|k| float(k, "alpha_O")).collect::<Result<_, _>>()?;
        rows.push(TraceRow {
            tick: (time / cfg.dt).round() as usize,
            time,
            agent: int(1, "agent")?,
            team: int(2, "team")?,
            position: Point2::new(float(3, "x")?, float(4, "y")?),
            task: record[5].to_string(),
            alpha_p: float(6, "alpha_P")?,
            alpha_sec: float(7, "alpha_sec")?,
            alpha_o,
        });
    }
    Ok(rows)
}
