//! One-shot assignment problems read from JSON.
//!
//! ```json
//! {
//!   "positions": [[0.0, 0.0], [1.0, 0.0]],
//!   "trajectory": [0.5, 0.5],
//!   "online": [{ "id": 1, "location": [2.0, 0.0] }],
//!   "edges": [[0, 1]]
//! }
//! ```
//! `edges` is optional and defaults to the complete graph.

use std::path::Path;

use coobs_core::assignment::{build_weights, OnlineTaskSpec, TaskId, TaskSet, WeightMatrix};
use coobs_core::graph::CommGraph;
use coobs_core::Point2;
use serde::Deserialize;

use crate::export::ExportError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotTask {
    pub id: TaskId,
    pub location: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub positions: Vec<[f64; 2]>,
    pub trajectory: [f64; 2],
    #[serde(default)]
    pub online: Vec<SnapshotTask>,
    #[serde(default)]
    pub edges: Option<Vec<(usize, usize)>>,
}

impl Snapshot {
    pub fn read(path: &Path) -> Result<Self, ExportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ExportError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|source| ExportError::Json { path: path.to_path_buf(), source })
    }

    pub fn task_set(&self) -> TaskSet {
        let online = self
            .online
            .iter()
            .map(|t| OnlineTaskSpec { id: t.id, location: Point2::new(t.location[0], t.location[1]) })
            .collect();
        TaskSet::new(Point2::new(self.trajectory[0], self.trajectory[1]), online)
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.positions.iter().map(|p| Point2::new(p[0], p[1])).collect()
    }

    pub fn graph(&self) -> coobs_core::Result<CommGraph> {
        match &self.edges {
            Some(edges) => CommGraph::new(self.positions.len(), edges),
            None => CommGraph::complete(self.positions.len()),
        }
    }

    pub fn weights(&self, config: &coobs_core::assignment::AdmmConfig) -> coobs_core::Result<WeightMatrix> {
        build_weights(&self.positions(), &self.task_set(), config)
    }
}
