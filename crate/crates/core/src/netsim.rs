//! Synchronous message-passing execution of the ADMM iteration.
//!
//! Every physical agent is an [`AgentNode`] holding its own assignment rows
//! and the rows of any shadow agents it hosts. The α- and u-updates are
//! local. Each consensus step is one exchange round in which every node
//! sends its hosted `z` rows and `α + u` rows to each neighbor; a node then
//! updates using only its own rows and its inbox. Neighbor rows are folded
//! in ascending row order, which makes the arithmetic identical to
//! [`admm_run`](crate::assignment::admm_run).
//!
//! Residuals for the stopping rule are computed by a global observer that
//! reads the node states after each outer round; the observer never feeds
//! anything back to the nodes except the stop signal.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::assignment::admm::{apply_consensus_row, column_drift, prepare, residuals, Problem};
use crate::assignment::{alpha_update_local, u_update_local, AdmmConfig, AdmmState, AssignmentMatrix, WeightMatrix};
use crate::graph::{local_laplacian_apply, CommGraph};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Z,
    AlphaU,
}

impl MessageKind {
    fn code(self) -> u8 {
        match self {
            MessageKind::Z => 0,
            MessageKind::AlphaU => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(MessageKind::Z),
            1 => Some(MessageKind::AlphaU),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Z => "z",
            MessageKind::AlphaU => "alpha_u",
        }
    }
}

/// One flat log record. `payload` is the sender's hosted rows concatenated
/// in ascending row order.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMessage {
    /// Exchange round, counted over all consensus steps of the run.
    pub round: u64,
    pub sender: usize,
    pub receiver: usize,
    pub kind: MessageKind,
    pub payload: Vec<f64>,
}

/// Per-agent state. `rows` lists the global row indices hosted here, the
/// agent's own row first among them by index order.
#[derive(Debug, Clone)]
pub struct AgentNode {
    pub id: usize,
    pub neighbors: Vec<usize>,
    pub rows: Vec<usize>,
    /// Hosted rows of each neighbor, known from the static roster.
    neighbor_rows: Vec<(usize, Vec<usize>)>,
    pub w: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    alpha_u: Vec<Vec<f64>>,
    inbox: Vec<RoundMessage>,
}

impl AgentNode {
    fn hosted_payload(rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().flatten().copied().collect()
    }

    fn alpha_step(&mut self, rho: f64) {
        for k in 0..self.rows.len() {
            self.alpha[k] = alpha_update_local(&self.w[k], &self.z[k], &self.u[k], rho);
            self.alpha_u[k] = self.alpha[k].iter().zip(&self.u[k]).map(|(a, u)| a + u).collect();
        }
    }

    fn u_step(&mut self) {
        for k in 0..self.rows.len() {
            self.u[k] = u_update_local(&self.u[k], &self.alpha[k], &self.z[k]);
        }
    }

    fn outgoing(&self, round: u64) -> Vec<RoundMessage> {
        let z = Self::hosted_payload(&self.z);
        let au = Self::hosted_payload(&self.alpha_u);
        let mut out = Vec::with_capacity(2 * self.neighbors.len());
        for &receiver in &self.neighbors {
            out.push(RoundMessage { round, sender: self.id, receiver, kind: MessageKind::Z, payload: z.clone() });
            out.push(RoundMessage { round, sender: self.id, receiver, kind: MessageKind::AlphaU, payload: au.clone() });
        }
        out
    }

    /// Consensus step from own rows and the inbox. Returns `false` if a
    /// message came from a non-neighbor or a needed row is missing.
    fn consensus_step(&mut self, width: usize, step: f64) -> bool {
        let mut audit_ok = true;
        // (row, v = z - (α + u)) for every row this node may read
        let mut view: Vec<(usize, Vec<f64>)> = Vec::new();
        for k in 0..self.rows.len() {
            view.push((self.rows[k], diff(&self.z[k], &self.alpha_u[k])));
        }
        for &(nb, ref nb_rows) in &self.neighbor_rows {
            let z = self.inbox.iter().find(|m| m.sender == nb && m.kind == MessageKind::Z);
            let au = self.inbox.iter().find(|m| m.sender == nb && m.kind == MessageKind::AlphaU);
            let (Some(z), Some(au)) = (z, au) else {
                audit_ok = false;
                continue;
            };
            if z.payload.len() != nb_rows.len() * width || au.payload.len() != z.payload.len() {
                audit_ok = false;
                continue;
            }
            for (k, &row) in nb_rows.iter().enumerate() {
                let span = k * width..(k + 1) * width;
                view.push((row, diff(&z.payload[span.clone()], &au.payload[span])));
            }
        }
        if self.inbox.iter().any(|m| !self.neighbors.contains(&m.sender) || m.receiver != self.id) {
            audit_ok = false;
        }
        view.sort_by_key(|(row, _)| *row);

        let mut next = self.z.clone();
        for (k, &row) in self.rows.iter().enumerate() {
            let own = &view.iter().find(|(r, _)| *r == row).expect("own row in view").1;
            let lv = local_laplacian_apply(own, view.iter().filter(|(r, _)| *r != row).map(|(_, v)| v.as_slice()));
            apply_consensus_row(&mut next[k], &lv, step);
        }
        self.z = next;
        self.inbox.clear();
        audit_ok
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Where inbound messages come from.
enum Source<'a> {
    Live,
    Replay { log: &'a [RoundMessage], cursor: usize },
}

/// The whole team plus the global residual observer.
pub struct Network {
    pub nodes: Vec<AgentNode>,
    config: AdmmConfig,
    step: f64,
    width: usize,
    row_count: usize,
    exchange_round: u64,
    outer_round: usize,
    message_count: u64,
    audit_ok: bool,
    max_column_drift: f64,
    record: bool,
    log: Vec<RoundMessage>,
    last_residuals: (f64, f64),
}

impl Network {
    pub fn new(graph: &CommGraph, w: &WeightMatrix, config: &AdmmConfig) -> Result<Self> {
        Self::with_start(graph, w, config, None)
    }

    /// Builds the nodes, optionally warm-started from a previous state of
    /// the same shape.
    pub fn with_start(
        graph: &CommGraph,
        w: &WeightMatrix,
        config: &AdmmConfig,
        warm_start: Option<&AdmmState>,
    ) -> Result<Self> {
        let Problem { step, .. } = prepare(w, graph, config)?;
        let n = w.size();
        let start = match warm_start {
            Some(s) if s.size() == n => s.clone(),
            _ => AdmmState::uniform(n),
        };
        let hosts = w.host_of_rows();
        let rows_of = |node: usize| -> Vec<usize> { (0..n).filter(|&r| hosts[r] == node).collect() };
        let nodes = (0..graph.node_count())
            .map(|id| {
                let rows = rows_of(id);
                let take = |m: &Matrix| rows.iter().map(|&r| m.row(r).to_vec()).collect::<Vec<_>>();
                AgentNode {
                    id,
                    neighbors: graph.neighbors(id).to_vec(),
                    neighbor_rows: graph.neighbors(id).iter().map(|&nb| (nb, rows_of(nb))).collect(),
                    w: take(&w.values),
                    alpha: take(&start.alpha),
                    z: take(&start.z),
                    alpha_u: vec![vec![0.0; n]; rows.len()],
                    u: take(&start.u),
                    rows,
                    inbox: Vec::new(),
                }
            })
            .collect();
        let mut net = Self {
            nodes,
            config: config.clone(),
            step,
            width: n,
            row_count: n,
            exchange_round: 0,
            outer_round: 0,
            message_count: 0,
            audit_ok: true,
            max_column_drift: 0.0,
            record: false,
            log: Vec::new(),
            last_residuals: (f64::INFINITY, f64::INFINITY),
        };
        net.max_column_drift = column_drift(&net.gather(|node| &node.z));
        Ok(net)
    }

    /// Keep every message for later export or replay.
    pub fn record_messages(&mut self, on: bool) {
        self.record = on;
    }

    fn gather(&self, pick: impl Fn(&AgentNode) -> &Vec<Vec<f64>>) -> Matrix {
        let mut m = Matrix::zeros(self.row_count, self.width);
        for node in &self.nodes {
            for (k, &r) in node.rows.iter().enumerate() {
                m.set_row(r, &pick(node)[k]);
            }
        }
        m
    }

    /// Current global state as seen by the observer.
    pub fn state(&self) -> AdmmState {
        AdmmState {
            alpha: self.gather(|n| &n.alpha),
            z: self.gather(|n| &n.z),
            u: self.gather(|n| &n.u),
            iteration: self.outer_round,
            primal_residual: self.last_residuals.0,
            dual_residual: self.last_residuals.1,
        }
    }

    fn exchange(&mut self, source: &mut Source<'_>) -> Result<()> {
        self.exchange_round += 1;
        let round = self.exchange_round;
        let mut sent: Vec<RoundMessage> = Vec::new();
        for node in &self.nodes {
            sent.extend(node.outgoing(round));
        }
        self.message_count += sent.len() as u64 / 2;
        let delivered = match source {
            Source::Live => sent,
            Source::Replay { log, cursor } => {
                let end = *cursor + sent.len();
                if end > log.len() {
                    return Err(Error::MessageLog(format!("log ends before exchange round {round}")));
                }
                let recorded = &log[*cursor..end];
                *cursor = end;
                if recorded != sent.as_slice() {
                    return Err(Error::MessageLog(format!("replay diverged at exchange round {round}")));
                }
                recorded.to_vec()
            }
        };
        if self.record {
            self.log.extend(delivered.iter().cloned());
        }
        for msg in delivered {
            match self.nodes.get_mut(msg.receiver) {
                Some(node) => node.inbox.push(msg),
                None => self.audit_ok = false,
            }
        }
        let (width, step) = (self.width, self.step);
        for node in &mut self.nodes {
            let ok = node.consensus_step(width, step);
            self.audit_ok &= ok;
        }
        Ok(())
    }

    fn outer_round_with(&mut self, source: &mut Source<'_>) -> Result<bool> {
        let rho = self.config.rho;
        for node in &mut self.nodes {
            node.alpha_step(rho);
        }
        let z_prev = self.gather(|n| &n.z);
        for _ in 0..self.config.inner_iterations {
            self.exchange(source)?;
            self.max_column_drift = self.max_column_drift.max(column_drift(&self.gather(|n| &n.z)));
        }
        for node in &mut self.nodes {
            node.u_step();
        }
        self.outer_round += 1;
        let state = self.state();
        let (primal, dual) = residuals(&state, &z_prev, rho);
        self.last_residuals = (primal, dual);
        Ok(primal < self.config.residual_tol && dual < self.config.residual_tol)
    }

    /// One outer round: local α-updates, `inner_iterations` exchanges and
    /// local u-updates. Returns whether the stopping rule is met.
    pub fn run_round(&mut self) -> bool {
        self.outer_round_with(&mut Source::Live).expect("live rounds cannot fail")
    }

    pub fn message_count(&self) -> u64 {
        self.message_count
    }

    /// `true` while no node has received a message from a non-neighbor or
    /// missed one from a neighbor.
    pub fn audit_ok(&self) -> bool {
        self.audit_ok
    }

    pub fn max_column_drift(&self) -> f64 {
        self.max_column_drift
    }

    pub fn messages(&self) -> &[RoundMessage] {
        &self.log
    }
}

/// Result of a distributed run.
#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub state: AdmmState,
    pub converged: bool,
    /// Directed-edge exchanges: `2·|E|·inner·outer`.
    pub message_count: u64,
    pub audit_ok: bool,
    pub max_column_drift: f64,
    /// Empty unless recording was requested.
    pub log: Vec<RoundMessage>,
}

fn drive(net: &mut Network, source: &mut Source<'_>) -> Result<DistributedRun> {
    let mut converged = false;
    for _ in 0..net.config.max_outer {
        if net.outer_round_with(source)? {
            converged = true;
            break;
        }
    }
    Ok(DistributedRun {
        state: net.state(),
        converged,
        message_count: net.message_count,
        audit_ok: net.audit_ok,
        max_column_drift: net.max_column_drift,
        log: core::mem::take(&mut net.log),
    })
}

/// Runs rounds until the centralized stopping rule holds or `max_outer`
/// passes, without turning non-convergence into an error.
pub fn run_network(
    graph: &CommGraph,
    w: &WeightMatrix,
    config: &AdmmConfig,
    warm_start: Option<&AdmmState>,
    record: bool,
) -> Result<DistributedRun> {
    let mut net = Network::with_start(graph, w, config, warm_start)?;
    net.record_messages(record);
    drive(&mut net, &mut Source::Live)
}

/// Distributed solve from the uniform start. Returns the assembled `α` and
/// the number of directed-edge exchanges.
pub fn run_distributed_admm(
    graph: &CommGraph,
    w: &WeightMatrix,
    config: &AdmmConfig,
) -> Result<(AssignmentMatrix, u64)> {
    let run = run_network(graph, w, config, None, false)?;
    if !run.converged {
        return Err(Error::NonConvergence {
            rounds: run.state.iteration,
            primal: run.state.primal_residual,
            dual: run.state.dual_residual,
        });
    }
    Ok((run.state.alpha, run.message_count))
}

/// Re-executes a run, delivering messages from `log` instead of the live
/// senders. Fails if any node would have sent something different.
pub fn replay(
    graph: &CommGraph,
    w: &WeightMatrix,
    config: &AdmmConfig,
    warm_start: Option<&AdmmState>,
    log: &[RoundMessage],
) -> Result<DistributedRun> {
    let mut net = Network::with_start(graph, w, config, warm_start)?;
    let mut source = Source::Replay { log, cursor: 0 };
    let run = drive(&mut net, &mut source)?;
    if let Source::Replay { cursor, .. } = source {
        if cursor != log.len() {
            return Err(Error::MessageLog(format!("{} unused records", log.len() - cursor)));
        }
    }
    Ok(run)
}

/// Little-endian binary: per record `u64 round, u32 sender, u32 receiver,
/// u8 kind, u32 len, len × f64`.
pub fn encode_log(log: &[RoundMessage]) -> Vec<u8> {
    let mut out = Vec::new();
    for m in log {
        out.extend_from_slice(&m.round.to_le_bytes());
        out.extend_from_slice(&(m.sender as u32).to_le_bytes());
        out.extend_from_slice(&(m.receiver as u32).to_le_bytes());
        out.push(m.kind.code());
        out.extend_from_slice(&(m.payload.len() as u32).to_le_bytes());
        for v in &m.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_log(bytes: &[u8]) -> Result<Vec<RoundMessage>> {
    struct Reader<'a> {
        bytes: &'a [u8],
        pos: usize,
    }
    impl Reader<'_> {
        fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
            let end = self.pos + N;
            let slice = self
                .bytes
                .get(self.pos..end)
                .ok_or_else(|| Error::MessageLog(format!("truncated record at byte {}", self.pos)))?;
            self.pos = end;
            Ok(slice.try_into().expect("length checked"))
        }
    }

    let mut r = Reader { bytes, pos: 0 };
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let round = u64::from_le_bytes(r.take()?);
        let sender = u32::from_le_bytes(r.take()?) as usize;
        let receiver = u32::from_le_bytes(r.take()?) as usize;
        let [code] = r.take::<1>()?;
        let kind = MessageKind::from_code(code).ok_or_else(|| Error::MessageLog(format!("unknown kind {code}")))?;
        let len = u32::from_le_bytes(r.take()?) as usize;
        let mut payload = Vec::with_capacity(len);
        for _ in 0..len {
            payload.push(f64::from_le_bytes(r.take()?));
        }
        out.push(RoundMessage { round, sender, receiver, kind, payload });
    }
    Ok(out)
}

/// CSV with header `round,sender,receiver,kind,payload...`; payload values
/// occupy the trailing columns.
pub fn log_to_csv(log: &[RoundMessage]) -> String {
    let mut out = String::from("round,sender,receiver,kind,payload\n");
    for m in log {
        let _ = write!(out, "{},{},{},{}", m.round, m.sender, m.receiver, m.kind.as_str());
        for v in &m.payload {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn log_from_csv(text: &str) -> Result<Vec<RoundMessage>> {
    let bad = |line: usize, what: &str| Error::MessageLog(format!("line {line}: {what}"));
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| fields.next().ok_or_else(|| bad(line_no, &format!("missing {name}")));
        let round = next("round")?.parse().map_err(|_| bad(line_no, "bad round"))?;
        let sender = next("sender")?.parse().map_err(|_| bad(line_no, "bad sender"))?;
        let receiver = next("receiver")?.parse().map_err(|_| bad(line_no, "bad receiver"))?;
        let kind = match next("kind")? {
            "z" => MessageKind::Z,
            "alpha_u" => MessageKind::AlphaU,
            other => return Err(bad(line_no, &format!("unknown kind {other}"))),
        };
        let payload = fields
            .map(|f| f.parse::<f64>().map_err(|_| bad(line_no, "bad payload value")))
            .collect::<Result<Vec<_>>>()?;
        out.push(RoundMessage { round, sender, receiver, kind, payload });
    }
    Ok(out)
}
