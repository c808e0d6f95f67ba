//! Configuration sweeps.
//!
//! A sweep file lists explicit points and/or a cartesian grid:
//!
//! ```toml
//! n_bar = [32, 64, 128]
//! par = [1, 2]
//! precision = ["fixed8", "fixed16"]
//! f_kernel = [250e6]
//!
//! [[point]]
//! version = "A"
//! n_bar = 32
//! par = 2
//! precision = "fixed8"
//! f_kernel = 290e6
//! ```

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use pcnflow::dataflow::{analytic_perf, map_network, ArchParams, DepthTable};
use pcnflow::golden::{NetworkConfig, Precision};
use pcnflow::reference::{gpu_baseline, published_for, PUBLISHED};
use pcnflow::sim::{simulate, SimConfig};
use pcnflow::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::{out_dir, out_file, write_csv};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Sweep definition (TOML).
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Add the five implemented configurations A to E.
    #[arg(long)]
    pub published: bool,
    /// Network description; default is the reference network.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Also simulate this many synthetic events per configuration.
    #[arg(long, default_value_t = 0)]
    pub simulate_events: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV; default `bench.csv` in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    #[serde(default)]
    pub version: Option<String>,
    pub n_bar: usize,
    pub par: usize,
    pub precision: Precision,
    pub f_kernel: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub n_bar: Vec<usize>,
    pub par: Vec<usize>,
    pub precision: Vec<Precision>,
    pub f_kernel: Vec<f64>,
    pub point: Vec<SweepPoint>,
}

impl Sweep {
    pub fn load(path: &Path) -> pcnflow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {}", path.display(), e.message())))
    }

    /// Explicit points first, then the grid in `n_bar, par, precision,
    /// f_kernel` order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = self.point.clone();
        for &n_bar in &self.n_bar {
            for &par in &self.par {
                for &precision in &self.precision {
                    for &f_kernel in &self.f_kernel {
                        out.push(SweepPoint {
                            version: None,
                            n_bar,
                            par,
                            precision,
                            f_kernel,
                        });
                    }
                }
            }
        }
        out
    }
}

pub fn published_points() -> Vec<SweepPoint> {
    PUBLISHED
        .iter()
        .filter_map(|p| {
            Some(SweepPoint {
                version: Some(p.version.to_string()),
                n_bar: p.n_bar,
                par: p.par,
                precision: p.precision,
                f_kernel: p.f_kernel_hz?,
            })
        })
        .collect()
}

pub const BENCH_HEADER: &[&str] = &[
    "version",
    "precision",
    "n_bar",
    "par",
    "f_kernel_hz",
    "ii_cycles",
    "latency_cycles",
    "latency_us",
    "throughput_eps",
    "meets_8meps",
    "meets_10us",
    "sim_events",
    "sim_ii_cycles",
    "sim_latency_cycles",
    "sim_stall_cycles",
    "published_compute_latency_us",
    "published_e2e_throughput_eps",
    "published_e2e_latency_us",
    "gpu_e2e_throughput_eps",
    "gpu_e2e_latency_us",
    "note",
];

/// One CSV row. `throughput_eps = f_kernel_hz / ii_cycles` and
/// `latency_us = latency_cycles / f_kernel_hz * 1e6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub version: String,
    pub precision: Precision,
    pub n_bar: usize,
    pub par: usize,
    pub f_kernel_hz: f64,
    pub ii_cycles: u64,
    pub latency_cycles: u64,
    pub latency_us: f64,
    pub throughput_eps: f64,
    pub meets_8meps: bool,
    pub meets_10us: bool,
    pub sim_events: usize,
    pub sim_ii_cycles: Option<f64>,
    pub sim_latency_cycles: Option<u64>,
    pub sim_stall_cycles: Option<u64>,
    pub published_compute_latency_us: Option<f64>,
    pub published_e2e_throughput_eps: Option<f64>,
    pub published_e2e_latency_us: Option<f64>,
    pub gpu_e2e_throughput_eps: Option<f64>,
    pub gpu_e2e_latency_us: Option<f64>,
    pub note: String,
}

pub fn bench_point(
    network: &NetworkConfig,
    p: &SweepPoint,
    simulate_events: usize,
    seed: u64,
) -> pcnflow::Result<BenchRow> {
    let cfg = network.clone().with_precision(p.precision);
    let arch = ArchParams {
        n_bar: p.n_bar,
        par: p.par,
        f_kernel: p.f_kernel,
    };
    let graph = map_network(&cfg, arch, &DepthTable::default())?;
    let perf = analytic_perf(&graph)?;
    let published = published_for(p.precision, p.n_bar, p.par);
    let implemented = published.filter(|q| q.f_kernel_hz.is_some());
    let (sim_ii, sim_lat, sim_stalls) = if simulate_events > 0 {
        let events = synthetic_events(cfg.input_dim, p.n_bar, simulate_events, seed)?;
        let rep = simulate(&graph, None, &events, &SimConfig::timing_only())?;
        (
            Some(rep.ii_measured),
            Some(rep.latency_max),
            Some(rep.total_stalls),
        )
    } else {
        (None, None, None)
    };
    let gpu = implemented.and(gpu_baseline(p.n_bar));
    let note = match (published, implemented) {
        (_, Some(q)) if q.f_kernel_hz == Some(p.f_kernel) => "published configuration",
        (_, Some(_)) => "published configuration at a different clock",
        (Some(_), None) => "model only: configuration failed implementation",
        (None, _) => "model only",
    };
    Ok(BenchRow {
        version: p
            .version
            .clone()
            .or_else(|| published.map(|q| q.version.to_string()))
            .unwrap_or_default(),
        precision: p.precision,
        n_bar: p.n_bar,
        par: p.par,
        f_kernel_hz: p.f_kernel,
        ii_cycles: perf.ii_cycles,
        latency_cycles: perf.latency_cycles,
        latency_us: perf.latency_us(),
        throughput_eps: perf.throughput_eps,
        meets_8meps: perf.meets_throughput_req,
        meets_10us: perf.meets_latency_req,
        sim_events: simulate_events,
        sim_ii_cycles: sim_ii,
        sim_latency_cycles: sim_lat,
        sim_stall_cycles: sim_stalls,
        published_compute_latency_us: implemented
            .and_then(|q| q.compute_latency)
            .map(|(c, f)| c as f64 / f * 1e6),
        published_e2e_throughput_eps: implemented.and_then(|q| q.e2e_throughput_eps),
        published_e2e_latency_us: implemented.and_then(|q| q.e2e_latency_s).map(|s| s * 1e6),
        gpu_e2e_throughput_eps: gpu.map(|g| g.e2e_throughput_eps),
        gpu_e2e_latency_us: gpu.map(|g| g.e2e_latency_s * 1e6),
        note: note.to_string(),
    })
}

fn synthetic_events(
    f_dim: usize,
    n_bar: usize,
    count: usize,
    seed: u64,
) -> pcnflow::Result<Vec<pcnflow::events::CompactEvent>> {
    use pcnflow::events::{compact, generate_events, GeneratorConfig};
    let gen = GeneratorConfig {
        n_total: 10 * n_bar,
        f_dim,
        seed,
        ..Default::default()
    };
    generate_events(&gen, count)?
        .iter()
        .map(|f| compact(f, n_bar))
        .collect()
}

pub fn run(args: &BenchArgs) -> Result<()> {
    let network = match &args.network {
        Some(p) => NetworkConfig::load(p)?,
        None => NetworkConfig::reference(),
    };
    let mut points = Vec::new();
    if args.published {
        points.extend(published_points());
    }
    if let Some(p) = &args.sweep {
        points.extend(Sweep::load(p)?.points());
    }
    let rows: Vec<BenchRow> = points
        .par_iter()
        .map(|p| bench_point(&network, p, args.simulate_events, args.seed))
        .collect::<pcnflow::Result<_>>()?;
    let path = match &args.out {
        Some(p) => out_file(p),
        None => out_dir(None).join("bench.csv"),
    };
    write_csv(&path, BENCH_HEADER, &rows)?;
    for r in &rows {
        println!(
            "{:>2} {:>7} n_bar {:>3} par {:>2} {:>6.1} MHz: ii {:>3}, {:>9.4} MEPS{}, latency {:>5} cycles = {:>6.3} us{}",
            r.version,
            r.precision.to_string(),
            r.n_bar,
            r.par,
            r.f_kernel_hz / 1e6,
            r.ii_cycles,
            r.throughput_eps / 1e6,
            if r.meets_8meps { "" } else { " (below 8 MEPS)" },
            r.latency_cycles,
            r.latency_us,
            if r.meets_10us { "" } else { " (above 10 us)" },
        );
    }
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}
