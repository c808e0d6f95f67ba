//! Actor graph IR for single-rate streaming pipelines.
//!
//! Every actor consumes and produces one beat per cycle at most. A beat holds
//! `par` point rows, so one event of capacity `n_bar` is `ii = ceil(n_bar /
//! par)` beats long on every edge.

mod depths;
mod export;
mod mapper;
mod perf;
mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::golden::Aggregation;

pub use depths::{ceil_log2, DepthTable};
pub use export::{to_dot, to_json, to_text};
pub use mapper::{map_network, ArchParams};
pub use perf::{
    analytic_perf, longest_path, PerfEstimate, LATENCY_REQUIREMENT_S, THROUGHPUT_REQUIREMENT_EPS,
};
pub use validate::{validate, Violation};

pub type ActorId = usize;
pub type EdgeId = usize;

/// Per-point transforms (one input, one output).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PpeOp {
    Dense,
    /// GravNet coordinate transform.
    TransformS,
    /// GravNet feature transform.
    TransformF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpeStage {
    Ann,
    TopK,
    Exp,
    Gather,
    Mult,
    Reduce(Aggregation),
    Squash,
    CondAnn,
    Isolation,
    Sort,
    Selection,
}

impl GpeStage {
    /// Stages that need every row of an event before emitting any output.
    pub fn is_whole_event(&self) -> bool {
        matches!(
            self,
            GpeStage::Ann
                | GpeStage::Gather
                | GpeStage::CondAnn
                | GpeStage::Isolation
                | GpeStage::Sort
                | GpeStage::Selection
        )
    }

    pub fn label(&self) -> String {
        match self {
            GpeStage::Ann => "ann".into(),
            GpeStage::TopK => "topk".into(),
            GpeStage::Exp => "exp".into(),
            GpeStage::Gather => "gather".into(),
            GpeStage::Mult => "mult".into(),
            GpeStage::Reduce(a) => format!("reduce_{a}"),
            GpeStage::Squash => "squash".into(),
            GpeStage::CondAnn => "cond_ann".into(),
            GpeStage::Isolation => "isolation".into(),
            GpeStage::Sort => "sort".into(),
            GpeStage::Selection => "selection".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActorKind {
    Source,
    Sink,
    Ppe {
        layer: usize,
        op: PpeOp,
    },
    Gpe {
        layer: usize,
        stage: GpeStage,
    },
    Fork,
    /// Concatenates the rows of its inputs in port order.
    Join,
    WidthAdapter,
}

impl ActorKind {
    pub fn is_computational(&self) -> bool {
        matches!(self, ActorKind::Ppe { .. } | ActorKind::Gpe { .. })
    }

    pub fn is_topology(&self) -> bool {
        matches!(
            self,
            ActorKind::Fork | ActorKind::Join | ActorKind::WidthAdapter
        )
    }

    pub fn is_whole_event(&self) -> bool {
        matches!(self, ActorKind::Gpe { stage, .. } if stage.is_whole_event())
    }

    pub fn layer(&self) -> Option<usize> {
        match self {
            ActorKind::Ppe { layer, .. } | ActorKind::Gpe { layer, .. } => Some(*layer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub name: String,
    pub kind: ActorKind,
    pub par: usize,
    pub n_bar: usize,
    /// Cycles between consecutive events.
    pub ii: u64,
    /// Cycles from accepting a beat to emitting its result.
    pub depth: u64,
    pub in_ports: usize,
    pub out_ports: usize,
}

impl Actor {
    pub fn new(
        name: impl Into<String>,
        kind: ActorKind,
        par: usize,
        n_bar: usize,
        depth: u64,
    ) -> Self {
        let (in_ports, out_ports) = match kind {
            ActorKind::Source => (0, 1),
            ActorKind::Sink => (1, 0),
            ActorKind::Gpe {
                stage: GpeStage::Gather,
                ..
            } => (2, 1),
            _ => (1, 1),
        };
        Actor {
            name: name.into(),
            kind,
            par,
            n_bar,
            ii: initiation_interval(n_bar, par),
            depth,
            in_ports,
            out_ports,
        }
    }

    pub fn with_ports(mut self, in_ports: usize, out_ports: usize) -> Self {
        self.in_ports = in_ports;
        self.out_ports = out_ports;
        self
    }
}

/// `ceil(n_bar / par)`, or 0 for a degenerate `par = 0`.
pub fn initiation_interval(n_bar: usize, par: usize) -> u64 {
    if par == 0 {
        0
    } else {
        n_bar.div_ceil(par) as u64
    }
}

/// FIFO channel from an output port to an input port. Capacity is in beats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: ActorId,
    pub src_port: usize,
    pub dst: ActorId,
    pub dst_port: usize,
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataflowGraph {
    pub actors: Vec<Actor>,
    pub edges: Vec<Edge>,
    pub n_bar: usize,
    pub par: usize,
    /// Declared kernel clock in Hz.
    pub f_kernel: f64,
}

impl DataflowGraph {
    pub fn new(n_bar: usize, par: usize, f_kernel: f64) -> Self {
        DataflowGraph {
            actors: Vec::new(),
            edges: Vec::new(),
            n_bar,
            par,
            f_kernel,
        }
    }

    pub fn ii(&self) -> u64 {
        initiation_interval(self.n_bar, self.par)
    }

    pub fn add(&mut self, actor: Actor) -> ActorId {
        self.actors.push(actor);
        self.actors.len() - 1
    }

    /// Add an actor with the graph's `par` and `n_bar`.
    pub fn add_actor(&mut self, name: impl Into<String>, kind: ActorKind, depth: u64) -> ActorId {
        let actor = Actor::new(name, kind, self.par, self.n_bar, depth);
        self.add(actor)
    }

    pub fn connect(
        &mut self,
        src: ActorId,
        src_port: usize,
        dst: ActorId,
        dst_port: usize,
        capacity: usize,
    ) -> EdgeId {
        self.edges.push(Edge {
            src,
            src_port,
            dst,
            dst_port,
            capacity,
        });
        self.edges.len() - 1
    }

    /// Input edges of `a` ordered by port.
    pub fn inputs(&self, a: ActorId) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = (0..self.edges.len())
            .filter(|&e| self.edges[e].dst == a)
            .collect();
        v.sort_by_key(|&e| self.edges[e].dst_port);
        v
    }

    /// Output edges of `a` ordered by port.
    pub fn outputs(&self, a: ActorId) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = (0..self.edges.len())
            .filter(|&e| self.edges[e].src == a)
            .collect();
        v.sort_by_key(|&e| self.edges[e].src_port);
        v
    }

    pub fn find(&self, name: &str) -> Option<ActorId> {
        self.actors.iter().position(|a| a.name == name)
    }

    pub fn sources(&self) -> Vec<ActorId> {
        self.by_kind(ActorKind::Source)
    }

    pub fn sinks(&self) -> Vec<ActorId> {
        self.by_kind(ActorKind::Sink)
    }

    fn by_kind(&self, kind: ActorKind) -> Vec<ActorId> {
        (0..self.actors.len())
            .filter(|&a| self.actors[a].kind == kind)
            .collect()
    }

    /// Kahn order, lowest actor id first among ready actors.
    pub fn topo_order(&self) -> Result<Vec<ActorId>> {
        let n = self.actors.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::config("edge references a missing actor"));
            }
            indeg[e.dst] += 1;
        }
        let mut ready: std::collections::BTreeSet<ActorId> =
            (0..n).filter(|&a| indeg[a] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(a) = ready.pop_first() {
            order.push(a);
            for e in self.outputs(a) {
                let d = self.edges[e].dst;
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    ready.insert(d);
                }
            }
        }
        if order.len() != n {
            return Err(Error::config("dataflow graph contains a cycle"));
        }
        Ok(order)
    }

    /// Earliest cycle, relative to the event's first source beat, at which
    /// beat 0 can enter each actor.
    pub fn arrival_times(&self) -> Result<Vec<u64>> {
        let mut arr = vec![0u64; self.actors.len()];
        for a in self.topo_order()? {
            for e in self.inputs(a) {
                let s = self.edges[e].src;
                arr[a] = arr[a].max(arr[s] + self.actors[s].depth);
            }
        }
        Ok(arr)
    }

    /// Cycles a beat waits in each edge's FIFO for the other inputs of a
    /// reconvergent join.
    pub fn edge_slack(&self) -> Result<Vec<u64>> {
        let arr = self.arrival_times()?;
        Ok(self
            .edges
            .iter()
            .map(|e| arr[e.dst] - (arr[e.src] + self.actors[e.src].depth))
            .collect())
    }

    /// Size every FIFO to `max(2, slack + 1)` beats.
    pub fn size_fifos(&mut self) -> Result<()> {
        let slack = self.edge_slack()?;
        for (e, s) in self.edges.iter_mut().zip(slack) {
            e.capacity = min_fifo_capacity(s).max(2);
        }
        Ok(())
    }
}

/// Smallest capacity that absorbs `slack` cycles of waiting without
/// back-pressure.
pub fn min_fifo_capacity(slack: u64) -> usize {
    slack as usize + 1
}
