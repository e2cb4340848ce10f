use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coobs::core::assignment::{objective_of, oracle_solve, round_assignment, AdmmConfig};
use coobs::core::netsim::run_network;
use coobs::core::security::build_lookup_table;
use coobs::export::{lookup_table_file, EVENTS, TRAJECTORIES};
use coobs::mission::task_label_name;
use coobs::snapshot::Snapshot;
use coobs::{export_outputs, load_scenario, read_events, read_traces, run_mission, verify_log, ScenarioConfig};

#[derive(Parser)]
#[command(name = "coobs", version, about = "Co-observation-secured task assignment for robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the regroup lookup table of every team.
    Table {
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for `lookup_team<id>.csv`; printed to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one assignment problem with the distributed ADMM solver.
    Assign {
        #[arg(long)]
        snapshot: PathBuf,
        /// Take ADMM settings from this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Directory for the message log (`messages.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one assignment problem by enumeration.
    Oracle {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run the mission, write all outputs and verify them.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Audit `events.json` and `trajectories.csv` in a result directory.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

type AnyError = Box<dyn std::error::Error>;

fn scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, AnyError> {
    let mut cfg = load_scenario(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn admm_config(path: Option<&Path>) -> Result<AdmmConfig, AnyError> {
    Ok(match path {
        Some(p) => load_scenario(p)?.admm,
        None => AdmmConfig::default(),
    })
}

fn run(cli: Cli) -> Result<bool, AnyError> {
    match cli.command {
        Command::Table { scenario: path, out } => {
            let cfg = scenario(&path, None)?;
            for team in &cfg.teams {
                let table = build_lookup_table(&team.trajectory, &cfg.forbidden, cfg.v_max);
                match &out {
                    Some(dir) => {
                        std::fs::create_dir_all(dir)?;
                        let file = dir.join(lookup_table_file(team.id));
                        std::fs::write(&file, table.to_csv())?;
                        println!("team {}: wrote {}", team.id, file.display());
                    }
                    None => print!("# team {}\n{}", team.id, table.to_csv()),
                }
            }
            Ok(true)
        }
        Command::Assign { snapshot, scenario: path, out } => {
            let snap = Snapshot::read(&snapshot)?;
            let config = admm_config(path.as_deref())?;
            let w = snap.weights(&config)?;
            let graph = snap.graph()?;
            let run = run_network(&graph, &w, &config, None, out.is_some())?;
            let perm = round_assignment(&run.state.alpha);
            println!("tasks: {}", w.tasks.iter().map(|&l| task_label_name(l)).collect::<Vec<_>>().join(" "));
            for (r, agent) in w.agents.iter().enumerate() {
                let row: Vec<String> = run.state.alpha.row(r).iter().map(|v| format!("{v:.6}")).collect();
                println!("{agent:?}: [{}] -> {}", row.join(", "), task_label_name(w.tasks[perm[r]]));
            }
            println!(
                "converged: {}  rounds: {}  messages: {}  objective: {}",
                run.converged,
                run.state.iteration,
                run.message_count,
                objective_of(&w.values, &perm)
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let file = dir.join("messages.csv");
                std::fs::write(&file, coobs::core::netsim::log_to_csv(&run.log))?;
                println!("wrote {}", file.display());
            }
            Ok(run.converged)
        }
        Command::Oracle { snapshot, scenario: path } => {
            let snap = Snapshot::read(&snapshot)?;
            let w = snap.weights(&admm_config(path.as_deref())?)?;
            let (perm, objective) = oracle_solve(&w)?;
            for (r, agent) in w.agents.iter().enumerate() {
                println!("{agent:?} -> {}", task_label_name(w.tasks[perm[r]]));
            }
            println!("objective: {objective}");
            Ok(true)
        }
        Command::Simulate { scenario: path, out, seed } => {
            let cfg = scenario(&path, seed)?;
            let output = run_mission(&cfg)?;
            export_outputs(&output, &cfg, &out)?;
            let report = verify_log(&output.log, &output.traces, &cfg);
            let m = &output.metrics;
            println!(
                "online tasks: {} fulfilled, {} abandoned, {} rejected (of {})",
                m.fulfilled, m.abandoned, m.rejected, m.online_tasks
            );
            println!("ADMM: {} runs, {} rounds, {} messages", m.admm_runs, m.admm_rounds, m.admm_messages);
            print!("{report}");
            println!("outputs in {}", out.display());
            Ok(report.passed())
        }
        Command::Verify { scenario: path, out, seed } => {
            let cfg = scenario(&path, seed)?;
            let log = read_events(&out.join(EVENTS))?;
            let traces = read_traces(&out.join(TRAJECTORIES), &cfg)?;
            let report = verify_log(&log, &traces, &cfg);
            print!("{report}");
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
