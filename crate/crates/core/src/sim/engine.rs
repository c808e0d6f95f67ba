use std::collections::{HashMap, VecDeque};
use std::fmt::Write;

use ndarray::Array2;

use super::{ActorStalls, EventTrace, SimConfig, SimReport};
use crate::dataflow::{ActorKind, DataflowGraph, EdgeId, GpeStage, PpeOp};
use crate::error::{Error, Result};
use crate::events::CompactEvent;
use crate::golden::kernels::{self, CondLayout};
use crate::golden::{
    Aggregation, CondensationLayer, DenseLayer, GravNetLayer, InferenceResult, Model, PreparedLayer,
};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone)]
struct Beat {
    event: usize,
    index: usize,
    rows: Option<Rows>,
}

struct PipeItem {
    ready: u64,
    event: usize,
    index: usize,
    /// Per-row actors compute on accept; whole-event actors leave this empty
    /// and read the finished event from `done`.
    rows: Option<Rows>,
}

#[derive(Clone, Copy)]
enum Func<'m> {
    /// Timing only: beats carry no rows.
    Opaque,
    Identity,
    Join,
    Dense(&'m DenseLayer),
    Ann,
    TopK(&'m GravNetLayer),
    Exp(&'m GravNetLayer),
    Gather(&'m GravNetLayer),
    Mult(&'m GravNetLayer),
    Reduce(&'m GravNetLayer, Aggregation),
    Squash(&'m CondensationLayer),
    CondAnn(&'m CondensationLayer),
    Isolation(&'m CondensationLayer),
    Sort(&'m CondensationLayer),
    Selection(&'m CondensationLayer),
}

struct ActorState<'m> {
    kind: ActorKind,
    func: Func<'m>,
    inputs: Vec<EdgeId>,
    outputs: Vec<EdgeId>,
    depth: u64,
    pipe: VecDeque<PipeItem>,
    pipe_cap: usize,
    whole: bool,
    collecting: Vec<Rows>,
    done: HashMap<usize, Vec<Option<Rows>>>,
    mid_event: bool,
    stalls: u64,
}

struct Fifo {
    q: VecDeque<Beat>,
    cap: usize,
}

impl Fifo {
    fn has_space(&self) -> bool {
        self.q.len() < self.cap
    }
}

fn resolve<'m>(kind: ActorKind, model: Option<&'m Model>) -> Result<Func<'m>> {
    let Some(model) = model else {
        return Ok(match kind {
            ActorKind::Ppe { .. } | ActorKind::Gpe { .. } => Func::Opaque,
            _ => Func::Identity,
        });
    };
    let layer = |i: usize| {
        model
            .layer(i)
            .ok_or_else(|| Error::config(format!("actor refers to missing layer {i}")))
    };
    let wrong = |i: usize| Error::config(format!("actor kind does not match layer {i}"));
    Ok(match kind {
        ActorKind::Source | ActorKind::Sink | ActorKind::Fork | ActorKind::WidthAdapter => {
            Func::Identity
        }
        ActorKind::Join => Func::Join,
        ActorKind::Ppe { layer: i, op } => match (layer(i)?, op) {
            (PreparedLayer::Dense(d), PpeOp::Dense) => Func::Dense(d),
            (PreparedLayer::GravNet(g), PpeOp::TransformS) => Func::Dense(&g.coords),
            (PreparedLayer::GravNet(g), PpeOp::TransformF) => Func::Dense(&g.features),
            _ => return Err(wrong(i)),
        },
        ActorKind::Gpe { layer: i, stage } => match (layer(i)?, stage) {
            (PreparedLayer::GravNet(_), GpeStage::Ann) => Func::Ann,
            (PreparedLayer::GravNet(g), GpeStage::TopK) => Func::TopK(g),
            (PreparedLayer::GravNet(g), GpeStage::Exp) => Func::Exp(g),
            (PreparedLayer::GravNet(g), GpeStage::Gather) => Func::Gather(g),
            (PreparedLayer::GravNet(g), GpeStage::Mult) => Func::Mult(g),
            (PreparedLayer::GravNet(g), GpeStage::Reduce(a)) => Func::Reduce(g, a),
            (PreparedLayer::Condensation(c), GpeStage::Squash) => Func::Squash(c),
            (PreparedLayer::Condensation(c), GpeStage::CondAnn) => Func::CondAnn(c),
            (PreparedLayer::Condensation(c), GpeStage::Isolation) => Func::Isolation(c),
            (PreparedLayer::Condensation(c), GpeStage::Sort) => Func::Sort(c),
            (PreparedLayer::Condensation(c), GpeStage::Selection) => Func::Selection(c),
            _ => return Err(wrong(i)),
        },
    })
}

/// Output row of a per-row actor. `ports` holds this row from every input.
fn row_op(func: Func<'_>, ports: &[&Vec<f64>], live: bool) -> Vec<f64> {
    let x = ports[0];
    match func {
        Func::Opaque | Func::Identity => x.clone(),
        Func::Join => ports.iter().flat_map(|r| r.iter().copied()).collect(),
        Func::Dense(d) => kernels::dense_row_masked(d, x, live),
        Func::TopK(g) => kernels::knn_row(x, g.k),
        Func::Exp(g) => kernels::exp_row(g, x),
        Func::Mult(g) => kernels::mult_row(g, x),
        Func::Reduce(g, a) => kernels::reduce_row(g, a, x),
        Func::Squash(c) => kernels::squash_row(c, x, live),
        Func::Ann
        | Func::Gather(_)
        | Func::CondAnn(_)
        | Func::Isolation(_)
        | Func::Sort(_)
        | Func::Selection(_) => unreachable!("whole-event stage"),
    }
}

fn matrix(rows: &[Vec<f64>], cols: std::ops::Range<usize>) -> Array2<f64> {
    let mut m = Array2::zeros((rows.len(), cols.len()));
    for (i, r) in rows.iter().enumerate() {
        for (c, col) in cols.clone().enumerate() {
            m[[i, c]] = r[col];
        }
    }
    m
}

/// Output rows of a whole-event stage from every row of every input port.
fn event_op(func: Func<'_>, ports: &[Rows], n: usize) -> Rows {
    let rows = &ports[0];
    let n_bar = rows.len();
    let width = |r: &Rows| r.first().map_or(0, |x| x.len());
    match func {
        Func::Ann => {
            let pts = matrix(rows, 0..width(rows));
            (0..n_bar)
                .map(|i| kernels::distance_row(pts.view(), i, n))
                .collect()
        }
        Func::Gather(g) => {
            let f = matrix(&ports[1], 0..width(&ports[1]));
            rows.iter()
                .map(|e| kernels::gather_row(g, e, f.view()))
                .collect()
        }
        Func::CondAnn(c) => {
            let coords = matrix(rows, CondLayout::of(c).coords());
            rows.iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut out = r.clone();
                    out.extend(kernels::distance_row(coords.view(), i, n));
                    out
                })
                .collect()
        }
        Func::Isolation(c) => {
            let lay = CondLayout::of(c);
            let sw = lay.squash_width();
            let beta: Vec<f64> = rows.iter().map(|r| r[lay.beta()]).collect();
            let d2 = matrix(rows, sw..sw + n_bar);
            let rho2 = kernels::isolation_sq(&beta, d2.view(), n);
            append_column(rows, &rho2)
        }
        Func::Sort(c) => {
            let beta: Vec<f64> = rows.iter().map(|r| r[CondLayout::of(c).beta()]).collect();
            let rank: Vec<f64> = kernels::priority_rank(&beta, n)
                .into_iter()
                .map(|r| r as f64)
                .collect();
            append_column(rows, &rank)
        }
        Func::Selection(c) => {
            let lay = CondLayout::of(c);
            let sw = lay.squash_width();
            let beta: Vec<f64> = rows.iter().map(|r| r[lay.beta()]).collect();
            let d2 = matrix(rows, sw..sw + n_bar);
            let rho2: Vec<f64> = rows.iter().map(|r| r[sw + n_bar]).collect();
            let mut order = vec![0usize; n];
            for (i, r) in rows.iter().enumerate().take(n) {
                order[r[sw + n_bar + 1] as usize] = i;
            }
            let sel = kernels::select(&c.params, &beta, d2.view(), &rho2, &order, n);
            let squash = matrix(rows, 0..sw);
            let out = kernels::selection_rows(lay, squash.view(), &sel);
            out.rows().into_iter().map(|r| r.to_vec()).collect()
        }
        Func::Opaque => vec![Vec::new(); n_bar],
        _ => unreachable!("per-row stage"),
    }
}

fn append_column(rows: &Rows, col: &[f64]) -> Rows {
    rows.iter()
        .zip(col)
        .map(|(r, &v)| {
            let mut out = r.clone();
            out.push(v);
            out
        })
        .collect()
}

#[derive(Clone, Copy, Default)]
struct Stamps {
    first_in: u64,
    last_in: u64,
    first_out: u64,
    last_out: u64,
}

/// Stream `events` back to back through `graph`.
///
/// The graph is not required to pass validation, so under-buffered graphs can
/// be simulated to observe their stalls. A graph that stops making progress
/// yields [`Error::Deadlock`].
pub fn simulate(
    graph: &DataflowGraph,
    model: Option<&Model>,
    events: &[CompactEvent],
    cfg: &SimConfig,
) -> Result<SimReport> {
    if cfg.max_cycles == 0 {
        return Err(Error::config("max_cycles must be positive"));
    }
    let order = graph.topo_order()?;
    let (source, sink) = match (graph.sources().as_slice(), graph.sinks().as_slice()) {
        (&[s], &[k]) => (s, k),
        _ => {
            return Err(Error::config(
                "simulation needs exactly one source and one sink",
            ))
        }
    };
    let n_bar = graph.n_bar;
    let par = graph.par;
    let ii = graph.ii() as usize;
    if ii == 0 {
        return Err(Error::config("graph par must be positive"));
    }
    for (i, ev) in events.iter().enumerate() {
        if ev.n_bar() != n_bar || ev.n > n_bar {
            return Err(Error::data(format!(
                "event {i} has capacity {} and {} points, graph capacity is {n_bar}",
                ev.n_bar(),
                ev.n
            )));
        }
    }
    let model = if cfg.functional {
        let m = model.ok_or_else(|| Error::config("functional simulation needs a model"))?;
        if let Some(ev) = events.first() {
            if ev.f_dim() != m.config().input_dim {
                return Err(Error::data(format!(
                    "events have {} features, network expects {}",
                    ev.f_dim(),
                    m.config().input_dim
                )));
            }
        }
        if m.config().max_k() >= n_bar {
            return Err(Error::config("k must be below the graph capacity"));
        }
        Some(m)
    } else {
        None
    };

    let mut fifos: Vec<Fifo> = graph
        .edges
        .iter()
        .enumerate()
        .map(|(e, edge)| Fifo {
            q: VecDeque::new(),
            cap: cfg.fifo_capacity.get(&e).copied().unwrap_or(edge.capacity),
        })
        .collect();
    if let Some(e) = fifos.iter().position(|f| f.cap == 0) {
        return Err(Error::config(format!("edge {e} has zero FIFO capacity")));
    }

    let mut actors: Vec<ActorState> = Vec::with_capacity(graph.actors.len());
    for (a, actor) in graph.actors.iter().enumerate() {
        let inputs = graph.inputs(a);
        actors.push(ActorState {
            kind: actor.kind,
            func: resolve(actor.kind, model)?,
            collecting: vec![Vec::new(); inputs.len()],
            outputs: graph.outputs(a),
            inputs,
            depth: actor.depth,
            pipe: VecDeque::new(),
            pipe_cap: actor.depth.max(1) as usize,
            whole: actor.kind.is_whole_event(),
            done: HashMap::new(),
            mid_event: false,
            stalls: 0,
        });
    }
    if actors[source].outputs.is_empty() || actors[sink].inputs.is_empty() {
        return Err(Error::config("source and sink must be connected"));
    }

    let layout = model.map(|m| CondLayout::of(m.condensation()));
    let beat_rows = |g: usize| par.min(n_bar - g * par);
    let total_beats = events.len() * ii;
    let idle_limit = graph.actors.iter().map(|a| a.depth).max().unwrap_or(0) + 2;

    let mut stamps = vec![Stamps::default(); events.len()];
    let mut outputs = Vec::with_capacity(if model.is_some() { events.len() } else { 0 });
    let mut sink_rows: Rows = Vec::new();
    let mut next_in = 0usize;
    let mut next_out = 0usize;
    let mut in_order = true;
    let mut last_active = 0u64;
    let mut t = 0u64;

    while next_out < total_beats {
        if t >= cfg.max_cycles {
            return Err(deadlock(graph, &actors, &fifos, t, "cycle limit reached"));
        }
        let mut active = false;
        for &a in &order {
            if a == source {
                if next_in >= total_beats {
                    continue;
                }
                let st = &mut actors[a];
                if st.outputs.iter().all(|&e| fifos[e].has_space()) {
                    let (ev, g) = (next_in / ii, next_in % ii);
                    let rows = model.map(|m| {
                        let event = &events[ev];
                        (g * par..g * par + beat_rows(g))
                            .map(|r| {
                                if r < event.n {
                                    m.prepare_row(&event.x.row(r).to_vec())
                                } else {
                                    vec![0.0; event.f_dim()]
                                }
                            })
                            .collect()
                    });
                    push_all(
                        &mut fifos,
                        &st.outputs,
                        Beat {
                            event: ev,
                            index: g,
                            rows,
                        },
                    );
                    if g == 0 {
                        stamps[ev].first_in = t;
                    }
                    if g == ii - 1 {
                        stamps[ev].last_in = t;
                    }
                    next_in += 1;
                    active = true;
                } else {
                    st.stalls += 1;
                }
                continue;
            }
            if a == sink {
                let st = &mut actors[a];
                let e = st.inputs[0];
                match fifos[e].q.pop_front() {
                    Some(beat) => {
                        active = true;
                        let expect = (next_out / ii, next_out % ii);
                        if (beat.event, beat.index) != expect {
                            in_order = false;
                        }
                        next_out += 1;
                        let s = &mut stamps[beat.event];
                        if beat.index == 0 {
                            s.first_out = t;
                        }
                        st.mid_event = beat.index + 1 < ii;
                        if let (Some(rows), Some(lay)) = (beat.rows, layout) {
                            sink_rows.extend(rows);
                            if beat.index == ii - 1 {
                                let w = lay.selection_width();
                                if sink_rows.iter().any(|r| r.len() != w) {
                                    return Err(Error::config(
                                        "functional simulation needs a graph ending in selection",
                                    ));
                                }
                                let m = matrix(&sink_rows, 0..w);
                                outputs.push(InferenceResult::from_rows(
                                    m.view(),
                                    events[beat.event].n,
                                    lay,
                                ));
                                sink_rows.clear();
                            }
                        }
                        if beat.index == ii - 1 {
                            stamps[beat.event].last_out = t;
                        }
                    }
                    None => {
                        if st.mid_event {
                            st.stalls += 1;
                        }
                    }
                }
                continue;
            }

            let blocked = try_emit(&mut actors[a], &mut fifos, t, ii, &mut active);
            let accepted = try_accept(&mut actors[a], &mut fifos, t, ii, par, events, &mut active)?;
            let st = &mut actors[a];
            if accepted && st.depth == 0 {
                try_emit(st, &mut fifos, t, ii, &mut active);
            }
            if blocked || (st.mid_event && !accepted) {
                st.stalls += 1;
            }
        }
        if active {
            last_active = t;
        } else if t - last_active > idle_limit {
            return Err(deadlock(graph, &actors, &fifos, t, "no progress"));
        }
        t += 1;
    }

    let traces: Vec<EventTrace> = stamps
        .iter()
        .enumerate()
        .map(|(i, s)| EventTrace {
            event_id: i,
            n: events[i].n,
            t_first_in: s.first_in,
            t_last_in: s.last_in,
            t_first_out: s.first_out,
            t_last_out: s.last_out,
            latency_cycles: s.last_out - s.first_in,
        })
        .collect();
    let mut lat: Vec<u64> = traces.iter().map(|t| t.latency_cycles).collect();
    lat.sort_unstable();
    let pick = |q: f64| {
        if lat.is_empty() {
            0
        } else {
            lat[((q * lat.len() as f64).ceil() as usize).clamp(1, lat.len()) - 1]
        }
    };
    let ii_measured = match traces.len() {
        0 => 0.0,
        1 => (traces[0].t_last_out - traces[0].t_first_out + 1) as f64,
        count => {
            let w = cfg.warmup_events.min(count - 2);
            (traces[count - 1].t_last_out - traces[w].t_last_out) as f64 / (count - 1 - w) as f64
        }
    };
    let stalls: Vec<ActorStalls> = graph
        .actors
        .iter()
        .zip(&actors)
        .map(|(a, s)| ActorStalls {
            actor: a.name.clone(),
            stall_cycles: s.stalls,
        })
        .collect();
    Ok(SimReport {
        events: events.len(),
        ii_measured,
        ii_analytic: graph.ii(),
        latency_min: lat.first().copied().unwrap_or(0),
        latency_median: pick(0.5),
        latency_p95: pick(0.95),
        latency_max: lat.last().copied().unwrap_or(0),
        total_stalls: stalls.iter().map(|s| s.stall_cycles).sum(),
        stalls,
        cycles: t,
        in_order,
        traces: if cfg.record_trace { traces } else { Vec::new() },
        outputs,
    })
}

fn push_all(fifos: &mut [Fifo], outputs: &[EdgeId], beat: Beat) {
    if let Some((&last, rest)) = outputs.split_last() {
        for &e in rest {
            fifos[e].q.push_back(beat.clone());
        }
        fifos[last].q.push_back(beat);
    }
}

/// Emit the oldest finished beat. Returns true when it was ready but an output
/// FIFO was full.
fn try_emit(
    st: &mut ActorState<'_>,
    fifos: &mut [Fifo],
    t: u64,
    ii: usize,
    active: &mut bool,
) -> bool {
    let Some(front) = st.pipe.front() else {
        return false;
    };
    if front.ready > t || (st.whole && !st.done.contains_key(&front.event)) {
        return false;
    }
    if !st.outputs.iter().all(|&e| fifos[e].has_space()) {
        return true;
    }
    let item = st.pipe.pop_front().expect("front exists");
    let rows = if st.whole {
        let slots = st.done.get_mut(&item.event).expect("event finished");
        let rows = slots[item.index].take();
        if item.index == ii - 1 {
            st.done.remove(&item.event);
        }
        rows
    } else {
        item.rows
    };
    push_all(
        fifos,
        &st.outputs,
        Beat {
            event: item.event,
            index: item.index,
            rows,
        },
    );
    *active = true;
    false
}

fn try_accept(
    st: &mut ActorState<'_>,
    fifos: &mut [Fifo],
    t: u64,
    ii: usize,
    par: usize,
    events: &[CompactEvent],
    active: &mut bool,
) -> Result<bool> {
    if st.pipe.len() >= st.pipe_cap || st.inputs.iter().any(|&e| fifos[e].q.is_empty()) {
        return Ok(false);
    }
    let beats: Vec<Beat> = st
        .inputs
        .iter()
        .map(|&e| fifos[e].q.pop_front().expect("checked non-empty"))
        .collect();
    let (event, index) = (beats[0].event, beats[0].index);
    if beats.iter().any(|b| (b.event, b.index) != (event, index)) {
        return Err(Error::Precondition(format!(
            "{:?} received misaligned beats at cycle {t}",
            st.kind
        )));
    }
    *active = true;
    st.mid_event = index + 1 < ii;
    let n = events[event].n;
    let functional = beats.iter().all(|b| b.rows.is_some());

    let rows = if st.whole {
        if functional {
            for (port, b) in beats.into_iter().enumerate() {
                st.collecting[port].extend(b.rows.expect("functional beat"));
            }
        }
        if index == ii - 1 {
            let per_beat: Vec<Option<Rows>> = if functional {
                let ports =
                    std::mem::replace(&mut st.collecting, vec![Vec::new(); st.inputs.len()]);
                let mut out = event_op(st.func, &ports, n).into_iter();
                (0..ii)
                    .map(|g| {
                        let count = par.min(ports[0].len() - g * par);
                        Some(out.by_ref().take(count).collect())
                    })
                    .collect()
            } else {
                vec![None; ii]
            };
            st.done.insert(event, per_beat);
        }
        None
    } else if functional {
        let count = beats[0].rows.as_ref().map_or(0, |r| r.len());
        Some(
            (0..count)
                .map(|r| {
                    let ports: Vec<&Vec<f64>> = beats
                        .iter()
                        .map(|b| &b.rows.as_ref().expect("functional beat")[r])
                        .collect();
                    row_op(st.func, &ports, index * par + r < n)
                })
                .collect(),
        )
    } else {
        None
    };
    st.pipe.push_back(PipeItem {
        ready: t + st.depth,
        event,
        index,
        rows,
    });
    Ok(true)
}

fn deadlock(
    graph: &DataflowGraph,
    actors: &[ActorState<'_>],
    fifos: &[Fifo],
    t: u64,
    reason: &str,
) -> Error {
    let mut d = format!("{reason}; blocked actors:");
    for (a, st) in actors.iter().enumerate() {
        let full_out = st.outputs.iter().any(|&e| !fifos[e].has_space());
        let empty_in: Vec<&str> = st
            .inputs
            .iter()
            .filter(|&&e| fifos[e].q.is_empty())
            .map(|&e| graph.actors[graph.edges[e].src].name.as_str())
            .collect();
        if st.pipe.is_empty() && !full_out && !st.mid_event {
            continue;
        }
        let _ = write!(
            d,
            "\n  {}: {} in flight, output full: {full_out}, waiting on: [{}]",
            graph.actors[a].name,
            st.pipe.len(),
            empty_in.join(", ")
        );
    }
    Error::Deadlock {
        cycle: t,
        diagnostics: d,
    }
}
