//! Mission-level tooling on top of `coobs_core`: scenario files, the
//! simulated mission loop, log verification and output files.

pub mod export;
pub mod mission;
pub mod scenario;
pub mod snapshot;
pub mod verify;

pub use coobs_core as core;
pub use export::{export_outputs, read_events, read_traces, ExportError};
pub use mission::{run_mission, Event, Metrics, MissionError, MissionOutput, SimEventLog, TraceRow};
pub use scenario::{load_scenario, parse_scenario, ScenarioConfig, ScenarioError};
pub use verify::{verify_log, VerificationReport};
