//! Pattern-matching deployment: each layer kind is replaced by its actor
//! template.

use serde::{Deserialize, Serialize};

use super::depths::DepthContext;
use super::{ActorId, ActorKind, DataflowGraph, DepthTable, GpeStage, PpeOp};
use crate::error::{Error, Result};
use crate::golden::{LayerOp, NetworkConfig};

/// Architecture parameters of one deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchParams {
    pub n_bar: usize,
    pub par: usize,
    /// Kernel clock in Hz.
    pub f_kernel: f64,
}

impl ArchParams {
    pub fn check(&self) -> Result<()> {
        if self.n_bar == 0 {
            return Err(Error::config("n_bar must be positive"));
        }
        if !(1..=self.n_bar).contains(&self.par) {
            return Err(Error::config(format!(
                "par {} outside 1..={}",
                self.par, self.n_bar
            )));
        }
        if !(self.f_kernel.is_finite() && self.f_kernel > 0.0) {
            return Err(Error::config("f_kernel must be a positive frequency"));
        }
        Ok(())
    }
}

struct Builder<'a> {
    g: DataflowGraph,
    depths: &'a DepthTable,
}

impl Builder<'_> {
    fn actor(&mut self, name: String, kind: ActorKind, out_dim: usize, k: usize) -> ActorId {
        let ctx = DepthContext {
            n_bar: self.g.n_bar,
            ii: self.g.ii(),
            out_dim,
            k,
        };
        let depth = self.depths.depth(kind, ctx);
        self.g.add_actor(name, kind, depth)
    }

    fn chain(&mut self, from: ActorId, to: ActorId) {
        self.g.connect(from, 0, to, 0, 2);
    }
}

/// Map `cfg` onto a stall-free actor pipeline with sized FIFOs.
pub fn map_network(
    cfg: &NetworkConfig,
    arch: ArchParams,
    depths: &DepthTable,
) -> Result<DataflowGraph> {
    cfg.check()?;
    arch.check()?;
    if cfg.max_k() >= arch.n_bar {
        return Err(Error::config(format!(
            "k = {} must be below n_bar = {}",
            cfg.max_k(),
            arch.n_bar
        )));
    }
    let mut b = Builder {
        g: DataflowGraph::new(arch.n_bar, arch.par, arch.f_kernel),
        depths,
    };
    let mut tail = b.actor("source".into(), ActorKind::Source, 0, 0);

    for (li, layer) in cfg.layers.iter().enumerate() {
        let name = &layer.name;
        match &layer.op {
            LayerOp::Dense(d) => {
                let a = b.actor(
                    name.clone(),
                    ActorKind::Ppe {
                        layer: li,
                        op: PpeOp::Dense,
                    },
                    d.out,
                    0,
                );
                b.chain(tail, a);
                tail = a;
            }
            LayerOp::GravNet(g) => {
                let gpe = |stage| ActorKind::Gpe { layer: li, stage };
                let fork = b.actor(format!("{name}.fork"), ActorKind::Fork, 0, 0);
                b.g.actors[fork].out_ports = 2;
                b.chain(tail, fork);
                let ts = b.actor(
                    format!("{name}.transform_s"),
                    ActorKind::Ppe {
                        layer: li,
                        op: PpeOp::TransformS,
                    },
                    g.d_s,
                    0,
                );
                let tf = b.actor(
                    format!("{name}.transform_f"),
                    ActorKind::Ppe {
                        layer: li,
                        op: PpeOp::TransformF,
                    },
                    g.d_f,
                    0,
                );
                b.g.connect(fork, 0, ts, 0, 2);
                b.g.connect(fork, 1, tf, 0, 2);
                let ann = b.actor(format!("{name}.ann"), gpe(GpeStage::Ann), 0, g.k);
                let topk = b.actor(format!("{name}.topk"), gpe(GpeStage::TopK), 0, g.k);
                let exp = b.actor(format!("{name}.exp"), gpe(GpeStage::Exp), 0, g.k);
                let gather = b.actor(format!("{name}.gather"), gpe(GpeStage::Gather), 0, g.k);
                let mult = b.actor(format!("{name}.mult"), gpe(GpeStage::Mult), 0, g.k);
                b.chain(ts, ann);
                b.chain(ann, topk);
                b.chain(topk, exp);
                b.g.connect(exp, 0, gather, 0, 2);
                b.g.connect(tf, 0, gather, 1, 2);
                b.chain(gather, mult);
                let aggs = &g.aggregations;
                if aggs.len() == 1 {
                    let r = b.actor(
                        format!("{name}.reduce_{}", aggs[0]),
                        gpe(GpeStage::Reduce(aggs[0])),
                        0,
                        g.k,
                    );
                    b.chain(mult, r);
                    tail = r;
                } else {
                    let split = b.actor(format!("{name}.split"), ActorKind::Fork, 0, 0);
                    b.g.actors[split].out_ports = aggs.len();
                    b.chain(mult, split);
                    let join = b.actor(format!("{name}.concat"), ActorKind::Join, 0, 0);
                    b.g.actors[join].in_ports = aggs.len();
                    for (p, &agg) in aggs.iter().enumerate() {
                        let r = b.actor(
                            format!("{name}.reduce_{agg}"),
                            gpe(GpeStage::Reduce(agg)),
                            0,
                            g.k,
                        );
                        b.g.connect(split, p, r, 0, 2);
                        b.g.connect(r, 0, join, p, 2);
                    }
                    tail = join;
                }
            }
            LayerOp::Condensation(_) => {
                for stage in [
                    GpeStage::Squash,
                    GpeStage::CondAnn,
                    GpeStage::Isolation,
                    GpeStage::Sort,
                    GpeStage::Selection,
                ] {
                    let a = b.actor(
                        format!("{name}.{}", stage.label()),
                        ActorKind::Gpe { layer: li, stage },
                        0,
                        0,
                    );
                    b.chain(tail, a);
                    tail = a;
                }
            }
            LayerOp::Unsupported { kind, .. } => {
                return Err(Error::Mapping {
                    layer: name.clone(),
                    kind: kind.clone(),
                })
            }
        }
    }
    let sink = b.actor("sink".into(), ActorKind::Sink, 0, 0);
    b.chain(tail, sink);
    b.g.size_fifos()?;
    Ok(b.g)
}
