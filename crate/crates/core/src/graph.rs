//! Undirected team communication graphs.
//!
//! The ADMM consensus step only ever needs `[L v]_i = Σ_{j ∈ N(i)} (v_i - v_j)`,
//! which an agent can evaluate from its neighbors' values. The dense
//! Laplacian is kept around for tests and for the step-size bound.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Matrix, Result};

/// Connected undirected graph without self loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    n: usize,
    /// Sorted ascending for every node.
    neighbors: Vec<Vec<usize>>,
}

impl CommGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        let mut sets = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self loop at node {a}")));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        let graph = Self {
            n,
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        };
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(graph)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::new(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, ns) in self.neighbors.iter().enumerate() {
            out.extend(ns.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Graph over assignment rows where several rows may live on one
    /// physical node (shadow agents ride on their host). Rows are adjacent
    /// when they share a host or their hosts are adjacent.
    pub fn expand_for_rows(&self, host_of_row: &[usize]) -> Result<CommGraph> {
        let rows = host_of_row.len();
        if let Some(&bad) = host_of_row.iter().find(|&&h| h >= self.n) {
            return Err(Error::InvalidGraph(format!("row host {bad} is not a node")));
        }
        let mut edges = Vec::new();
        for r in 0..rows {
            for s in r + 1..rows {
                let (hr, hs) = (host_of_row[r], host_of_row[s]);
                if hr == hs || self.are_adjacent(hr, hs) {
                    edges.push((r, s));
                }
            }
        }
        CommGraph::new(rows, &edges)
    }

    /// Subgraph on `keep` (in the given order) where two kept nodes are
    /// adjacent if a path joins them through non-kept nodes only, i.e.
    /// dropped nodes keep relaying messages.
    pub fn relay_closure(&self, keep: &[usize]) -> Result<CommGraph> {
        let mut index_of = vec![None; self.n];
        for (k, &node) in keep.iter().enumerate() {
            index_of[node] = Some(k);
        }
        let mut edges = Vec::new();
        for (k, &start) in keep.iter().enumerate() {
            let mut seen = vec![false; self.n];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                for &j in &self.neighbors[i] {
                    if seen[j] {
                        continue;
                    }
                    seen[j] = true;
                    match index_of[j] {
                        Some(other) if other > k => edges.push((k, other)),
                        Some(_) => {}
                        None => queue.push_back(j),
                    }
                }
            }
        }
        CommGraph::new(keep.len(), &edges)
    }
}

/// `L = D - A`.
pub fn laplacian(g: &CommGraph) -> Matrix {
    let n = g.node_count();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        l[(i, i)] = g.degree(i) as f64;
        for &j in g.neighbors(i) {
            l[(i, j)] = -1.0;
        }
    }
    l
}

/// Row `i` of `L V` from node `i`'s own vector and its neighbors' vectors:
/// `Σ_j (own - v_j)`, accumulated in the order given.
pub fn local_laplacian_apply<'a, I>(own: &[f64], neighbor_values: I) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = vec![0.0; own.len()];
    for v in neighbor_values {
        debug_assert_eq!(v.len(), own.len());
        for ((o, a), b) in out.iter_mut().zip(own).zip(v) {
            *o += a - b;
        }
    }
    out
}

/// Gershgorin upper bound on the largest Laplacian eigenvalue.
pub fn spectral_bound(l: &Matrix) -> f64 {
    (0..l.rows())
        .map(|i| 2.0 * l[(i, i)])
        .fold(0.0, f64::max)
}
