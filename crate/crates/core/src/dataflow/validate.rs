use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use super::{initiation_interval, min_fifo_capacity, ActorId, ActorKind, DataflowGraph, EdgeId};

/// A broken single-rate or stall-freedom rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    IiMismatch {
        actor: String,
        ii: u64,
        expected: u64,
    },
    IiFormula {
        actor: String,
        ii: u64,
        expected: u64,
    },
    PortArity {
        actor: String,
        inputs: usize,
        outputs: usize,
    },
    ParOutOfRange {
        actor: String,
        par: usize,
        n_bar: usize,
    },
    RateMismatch {
        edge: EdgeId,
    },
    InsufficientFifo {
        edge: EdgeId,
        capacity: usize,
        required: usize,
    },
    WholeEventDepth {
        actor: String,
        depth: u64,
        ii: u64,
    },
    Unconnected {
        actor: String,
        detail: String,
    },
    Cycle,
    Unreachable {
        actor: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IiMismatch { actor, ii, expected } => write!(
                f,
                "initiation interval mismatch: {actor} has ii {ii}, pipeline runs at {expected}"
            ),
            Violation::IiFormula { actor, ii, expected } => write!(
                f,
                "{actor}: ii {ii} differs from ceil(n_bar/par) = {expected}"
            ),
            Violation::PortArity { actor, inputs, outputs } => write!(
                f,
                "{actor}: point processing element needs one input and one output, has {inputs}/{outputs}"
            ),
            Violation::ParOutOfRange { actor, par, n_bar } => {
                write!(f, "{actor}: par {par} outside 1..={n_bar}")
            }
            Violation::RateMismatch { edge } => {
                write!(f, "edge {edge}: endpoints disagree on beats per event")
            }
            Violation::InsufficientFifo {
                edge,
                capacity,
                required,
            } => write!(
                f,
                "insufficient FIFO capacity on edge {edge}: {capacity} beats, needs {required}"
            ),
            Violation::WholeEventDepth { actor, depth, ii } => write!(
                f,
                "{actor}: whole-event stage depth {depth} shorter than one event ({ii} beats)"
            ),
            Violation::Unconnected { actor, detail } => write!(f, "{actor}: {detail}"),
            Violation::Cycle => f.write_str("graph contains a cycle"),
            Violation::Unreachable { actor } => {
                write!(f, "{actor} is not on a source-to-sink path")
            }
        }
    }
}

/// Every rule the graph breaks; empty means the graph can stream without
/// stalls.
pub fn validate(g: &DataflowGraph) -> Vec<Violation> {
    let mut v = Vec::new();
    let name = |a: ActorId| g.actors[a].name.clone();

    for (a, actor) in g.actors.iter().enumerate() {
        if actor.par == 0 || actor.par > actor.n_bar {
            v.push(Violation::ParOutOfRange {
                actor: name(a),
                par: actor.par,
                n_bar: actor.n_bar,
            });
        }
        let expected = initiation_interval(actor.n_bar, actor.par);
        if actor.ii != expected {
            v.push(Violation::IiFormula {
                actor: name(a),
                ii: actor.ii,
                expected,
            });
        }
        if actor.kind.is_whole_event() && actor.depth < actor.ii {
            v.push(Violation::WholeEventDepth {
                actor: name(a),
                depth: actor.depth,
                ii: actor.ii,
            });
        }
        let ins = g.inputs(a);
        let outs = g.outputs(a);
        if matches!(actor.kind, ActorKind::Ppe { .. })
            && (actor.in_ports != 1 || actor.out_ports != 1 || ins.len() != 1 || outs.len() != 1)
        {
            v.push(Violation::PortArity {
                actor: name(a),
                inputs: ins.len(),
                outputs: outs.len(),
            });
        }
        check_ports(g, a, &ins, actor.in_ports, true, &mut v);
        check_ports(g, a, &outs, actor.out_ports, false, &mut v);
    }

    let computational: Vec<ActorId> = (0..g.actors.len())
        .filter(|&a| g.actors[a].kind.is_computational())
        .collect();
    if let Some(&first) = computational.first() {
        let expected = g.actors[first].ii;
        for &a in &computational[1..] {
            if g.actors[a].ii != expected {
                v.push(Violation::IiMismatch {
                    actor: name(a),
                    ii: g.actors[a].ii,
                    expected,
                });
            }
        }
    }

    for (e, edge) in g.edges.iter().enumerate() {
        let (s, d) = (&g.actors[edge.src], &g.actors[edge.dst]);
        if s.ii != d.ii || s.par != d.par {
            v.push(Violation::RateMismatch { edge: e });
        }
    }

    match g.edge_slack() {
        Ok(slack) => {
            for (e, edge) in g.edges.iter().enumerate() {
                let required = min_fifo_capacity(slack[e]);
                if edge.capacity < required {
                    v.push(Violation::InsufficientFifo {
                        edge: e,
                        capacity: edge.capacity,
                        required,
                    });
                }
            }
            reachability(g, &mut v);
        }
        Err(_) => v.push(Violation::Cycle),
    }
    v
}

fn check_ports(
    g: &DataflowGraph,
    a: ActorId,
    edges: &[EdgeId],
    ports: usize,
    input: bool,
    v: &mut Vec<Violation>,
) {
    let dir = if input { "input" } else { "output" };
    let mut seen = vec![0usize; ports];
    for &e in edges {
        let p = if input {
            g.edges[e].dst_port
        } else {
            g.edges[e].src_port
        };
        match seen.get_mut(p) {
            Some(c) => *c += 1,
            None => v.push(Violation::Unconnected {
                actor: g.actors[a].name.clone(),
                detail: format!("edge {e} uses missing {dir} port {p}"),
            }),
        }
    }
    for (p, &c) in seen.iter().enumerate() {
        if c != 1 {
            v.push(Violation::Unconnected {
                actor: g.actors[a].name.clone(),
                detail: format!("{dir} port {p} has {c} edges, expected 1"),
            });
        }
    }
}

fn reachability(g: &DataflowGraph, v: &mut Vec<Violation>) {
    let n = g.actors.len();
    let walk = |starts: Vec<ActorId>, forward: bool| {
        let mut seen = vec![false; n];
        let mut q: VecDeque<ActorId> = starts.into();
        while let Some(a) = q.pop_front() {
            if std::mem::replace(&mut seen[a], true) {
                continue;
            }
            for e in &g.edges {
                let (from, to) = if forward {
                    (e.src, e.dst)
                } else {
                    (e.dst, e.src)
                };
                if from == a && !seen[to] {
                    q.push_back(to);
                }
            }
        }
        seen
    };
    let fwd = walk(g.sources(), true);
    let back = walk(g.sinks(), false);
    for a in 0..n {
        if !(fwd[a] && back[a]) {
            v.push(Violation::Unreachable {
                actor: g.actors[a].name.clone(),
            });
        }
    }
}
