use std::fmt::Write;

use serde_json::{json, Value};

use super::{ActorKind, DataflowGraph};

fn kind_label(kind: &ActorKind) -> String {
    match kind {
        ActorKind::Source => "source".into(),
        ActorKind::Sink => "sink".into(),
        ActorKind::Ppe { layer, op } => format!("ppe[{layer}] {op:?}").to_lowercase(),
        ActorKind::Gpe { layer, stage } => format!("gpe[{layer}] {}", stage.label()),
        ActorKind::Fork => "fork".into(),
        ActorKind::Join => "join".into(),
        ActorKind::WidthAdapter => "width_adapter".into(),
    }
}

/// Human-readable listing of actors and edges.
pub fn to_text(g: &DataflowGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "graph n_bar={} par={} ii={} f_kernel={} Hz",
        g.n_bar,
        g.par,
        g.ii(),
        g.f_kernel
    );
    let _ = writeln!(s, "actors:");
    for (i, a) in g.actors.iter().enumerate() {
        let _ = writeln!(
            s,
            "  {i:>3} {:<28} {:<22} par={} ii={} depth={}",
            a.name,
            kind_label(&a.kind),
            a.par,
            a.ii,
            a.depth
        );
    }
    let _ = writeln!(s, "edges:");
    for (i, e) in g.edges.iter().enumerate() {
        let _ = writeln!(
            s,
            "  {i:>3} {}.{} -> {}.{} capacity={}",
            g.actors[e.src].name, e.src_port, g.actors[e.dst].name, e.dst_port, e.capacity
        );
    }
    s
}

/// Normalized JSON document: actors in id order, edges by actor name.
pub fn to_json(g: &DataflowGraph) -> Value {
    json!({
        "n_bar": g.n_bar,
        "par": g.par,
        "ii": g.ii(),
        "f_kernel": g.f_kernel,
        "actors": g.actors.iter().enumerate().map(|(i, a)| json!({
            "id": i,
            "name": a.name,
            "kind": a.kind,
            "par": a.par,
            "ii": a.ii,
            "depth": a.depth,
            "in_ports": a.in_ports,
            "out_ports": a.out_ports,
        })).collect::<Vec<_>>(),
        "edges": g.edges.iter().map(|e| json!({
            "src": g.actors[e.src].name,
            "src_port": e.src_port,
            "dst": g.actors[e.dst].name,
            "dst_port": e.dst_port,
            "capacity": e.capacity,
        })).collect::<Vec<_>>(),
    })
}

/// GraphViz dump.
pub fn to_dot(g: &DataflowGraph) -> String {
    let mut s = String::from("digraph dataflow {\n  rankdir=LR;\n");
    for (i, a) in g.actors.iter().enumerate() {
        let shape = match a.kind {
            ActorKind::Ppe { .. } => "box",
            ActorKind::Gpe { .. } => "box3d",
            ActorKind::Source | ActorKind::Sink => "oval",
            _ => "diamond",
        };
        let _ = writeln!(
            s,
            "  a{i} [shape={shape}, label=\"{}\\nii={} d={}\"];",
            a.name, a.ii, a.depth
        );
    }
    for e in &g.edges {
        let _ = writeln!(s, "  a{} -> a{} [label=\"{}\"];", e.src, e.dst, e.capacity);
    }
    s.push_str("}\n");
    s
}
