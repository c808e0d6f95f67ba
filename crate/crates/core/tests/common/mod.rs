//! Shared fixtures and brute-force oracles for the integration tests.
//!
//! The oracles are written straight from the operator definitions and do not
//! call into the golden kernels.

#![allow(dead_code)]

pub mod oracle;

use ndarray::Array2;
use pcnflow::dataflow::{ActorKind, DataflowGraph};
use pcnflow::events::{compact, generate_events, CompactEvent, GeneratorConfig};
use pcnflow::fixnum::FixFormat;
use pcnflow::golden::Precision;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One hardware configuration from the published table.
#[derive(Debug, Clone, Copy)]
pub struct Deployment {
    pub version: &'static str,
    pub precision: Precision,
    pub n_bar: usize,
    pub par: usize,
    pub f_kernel: f64,
}

pub const DEPLOYMENTS: [Deployment; 5] = [
    Deployment {
        version: "A",
        precision: Precision::Fixed8,
        n_bar: 32,
        par: 2,
        f_kernel: 290e6,
    },
    Deployment {
        version: "B",
        precision: Precision::Fixed16,
        n_bar: 32,
        par: 2,
        f_kernel: 260e6,
    },
    Deployment {
        version: "C",
        precision: Precision::Fixed8,
        n_bar: 64,
        par: 2,
        f_kernel: 280e6,
    },
    Deployment {
        version: "D",
        precision: Precision::Fixed16,
        n_bar: 64,
        par: 2,
        f_kernel: 249e6,
    },
    Deployment {
        version: "E",
        precision: Precision::Fixed8,
        n_bar: 128,
        par: 1,
        f_kernel: 127e6,
    },
];

/// Random value on the grid of `fmt` within `[lo, hi]`.
pub fn grid_value(r: &mut impl Rng, fmt: FixFormat, lo: f64, hi: f64) -> f64 {
    let a = (lo / fmt.lsb()).ceil() as i64;
    let b = (hi / fmt.lsb()).floor() as i64;
    fmt.from_raw(r.random_range(a..=b))
}

/// Matrix with `n` random live rows and zero padding up to `n_bar`. Values
/// sit on `fmt`'s grid when given, otherwise uniform in `[lo, hi]`.
pub fn random_rows(
    r: &mut impl Rng,
    n_bar: usize,
    n: usize,
    dim: usize,
    fmt: Option<FixFormat>,
    (lo, hi): (f64, f64),
) -> Array2<f64> {
    let mut x = Array2::zeros((n_bar, dim));
    for i in 0..n {
        for c in 0..dim {
            x[[i, c]] = match fmt {
                Some(f) => grid_value(r, f, lo, hi),
                None => r.random_range(lo..hi),
            };
        }
    }
    x
}

/// Events with uniformly random live count in `[1, n_bar]` and uniform
/// features. Feature values are f32-representable, as in event files.
pub fn random_events(n_bar: usize, f_dim: usize, count: usize, seed: u64) -> Vec<CompactEvent> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let n = r.random_range(1..=n_bar);
            let mut ev = CompactEvent::empty(n_bar, f_dim);
            let mut sensor = 0u32;
            for i in 0..n {
                sensor += r.random_range(1..4);
                ev.y[i] = sensor;
                for c in 0..f_dim {
                    ev.x[[i, c]] = r.random_range(-1.5f32..1.5) as f64;
                }
            }
            ev.n = n;
            ev
        })
        .collect()
}

/// Generator-backed workload: synthetic frames over `10 * n_bar` sensors,
/// compacted to `n_bar`.
pub fn workload(n_bar: usize, count: usize, seed: u64) -> Vec<CompactEvent> {
    let cfg = GeneratorConfig {
        n_total: 10 * n_bar,
        seed,
        ..Default::default()
    };
    generate_events(&cfg, count)
        .unwrap()
        .iter()
        .map(|f| compact(f, n_bar).unwrap())
        .collect()
}

/// Source, fork into two branches of the given depths, join, sink. The
/// short branch feeds the join through a FIFO of `short_capacity` beats.
pub fn fork_join(
    n_bar: usize,
    par: usize,
    short_depth: u64,
    long_depth: u64,
    short_capacity: usize,
) -> (DataflowGraph, usize) {
    let mut g = DataflowGraph::new(n_bar, par, 1e8);
    let src = g.add_actor("source", ActorKind::Source, 0);
    let fork = g.add_actor("fork", ActorKind::Fork, 1);
    g.actors[fork].out_ports = 2;
    let short = g.add_actor("short", ActorKind::WidthAdapter, short_depth);
    let long = g.add_actor("long", ActorKind::WidthAdapter, long_depth);
    let join = g.add_actor("join", ActorKind::Join, 1);
    g.actors[join].in_ports = 2;
    let sink = g.add_actor("sink", ActorKind::Sink, 0);
    g.connect(src, 0, fork, 0, 2);
    g.connect(fork, 0, short, 0, 2);
    g.connect(fork, 1, long, 0, 2);
    let tight = g.connect(short, 0, join, 0, short_capacity);
    g.connect(long, 0, join, 1, 2);
    g.connect(join, 0, sink, 0, 2);
    (g, tight)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
