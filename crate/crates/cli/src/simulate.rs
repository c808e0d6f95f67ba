use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use pcnflow::dataflow::{
    analytic_perf, map_network, to_dot, to_json, validate, PerfEstimate, LATENCY_REQUIREMENT_S,
    THROUGHPUT_REQUIREMENT_EPS,
};
use pcnflow::reference::published_for;
use pcnflow::sim::{check_equivalence, measure, simulate, ActorStalls, Measurement, Mismatch};
use serde::Serialize;

use crate::manifest::{self, ArchSpec};
use crate::output::{out_dir, write_atomic, write_csv, write_json};
use crate::run::golden_all;
use crate::MismatchError;

pub const TRACE_HEADER: &[&str] = &[
    "event_id",
    "n",
    "t_first_in",
    "t_last_in",
    "t_first_out",
    "t_last_out",
    "latency_cycles",
];
pub const STALL_HEADER: &[&str] = &["actor", "stall_cycles"];

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Compare outputs against the golden model; exit 6 on any mismatch.
    #[arg(long)]
    pub check: bool,
    /// Simulate timing only, without carrying point data.
    #[arg(long, conflicts_with = "check")]
    pub timing_only: bool,
}

#[derive(Debug, Serialize)]
struct SimSummary {
    version: Option<&'static str>,
    arch: ArchSpec,
    actors: usize,
    edges: usize,
    analytic: PerfEstimate,
    events: usize,
    cycles: u64,
    ii_measured: f64,
    latency_min: u64,
    latency_median: u64,
    latency_p95: u64,
    latency_max: u64,
    total_stalls: u64,
    in_order: bool,
    measured: Measurement,
    meets_throughput_req: bool,
    meets_latency_req: bool,
    mismatches: Option<usize>,
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let loaded = manifest::load(&args.manifest)?;
    let dir = out_dir(args.out_dir.as_deref().or(loaded.out_dir.as_deref()));
    let arch = loaded.manifest.arch;
    let graph = map_network(&loaded.network, arch.params(), &loaded.manifest.depths)?;
    let violations = validate(&graph);
    for v in &violations {
        eprintln!("validation: {v}");
    }
    let analytic = analytic_perf(&graph)?;

    let functional = !args.timing_only;
    let cfg = loaded.sim_config(functional);
    let report = simulate(&graph, Some(&loaded.model), &loaded.events.events, &cfg)?;
    let measured = measure(&report, arch.f_kernel);

    let mismatches: Option<Vec<Mismatch>> = if args.check {
        let golden = golden_all(&loaded.model, &loaded.events.events)?;
        Some(check_equivalence(&report, &golden))
    } else {
        None
    };

    let summary = SimSummary {
        version: published_for(arch.precision, arch.n_bar, arch.par).map(|p| p.version),
        arch,
        actors: graph.actors.len(),
        edges: graph.edges.len(),
        analytic,
        events: report.events,
        cycles: report.cycles,
        ii_measured: report.ii_measured,
        latency_min: report.latency_min,
        latency_median: report.latency_median,
        latency_p95: report.latency_p95,
        latency_max: report.latency_max,
        total_stalls: report.total_stalls,
        in_order: report.in_order,
        measured,
        meets_throughput_req: measured.throughput_eps >= THROUGHPUT_REQUIREMENT_EPS,
        meets_latency_req: measured.latency_us * 1e-6 <= LATENCY_REQUIREMENT_S,
        mismatches: mismatches.as_ref().map(Vec::len),
    };
    write_json(&dir.join("sim_summary.json"), &summary)?;
    write_atomic(&dir.join("graph.dot"), to_dot(&graph).as_bytes())?;
    write_json(&dir.join("graph.json"), &to_json(&graph))?;
    if cfg.record_trace {
        write_csv(&dir.join("traces.csv"), TRACE_HEADER, &report.traces)?;
    }
    let stalls: Vec<&ActorStalls> = report.stalls.iter().collect();
    write_csv(&dir.join("stalls.csv"), STALL_HEADER, &stalls)?;

    println!(
        "graph: {} actors, {} edges, ii {} cycles, analytic latency {} cycles",
        summary.actors, summary.edges, analytic.ii_cycles, analytic.latency_cycles
    );
    println!(
        "simulated {} events in {} cycles",
        report.events, report.cycles
    );
    println!(
        "ii measured {} cycles, throughput {:.4} MEPS ({})",
        report.ii_measured,
        measured.throughput_eps / 1e6,
        if summary.meets_throughput_req {
            "meets the 8 MEPS requirement"
        } else {
            "BELOW the 8 MEPS requirement"
        }
    );
    println!(
        "latency {} cycles = {:.3} us ({})",
        report.latency_max,
        measured.latency_us,
        if summary.meets_latency_req {
            "meets the 10 us requirement"
        } else {
            "ABOVE the 10 us requirement"
        }
    );
    println!("stall cycles: {}", report.total_stalls);
    println!("outputs written to {}", dir.display());

    if let Some(m) = mismatches {
        if !m.is_empty() {
            write_json(&dir.join("mismatches.json"), &m)?;
            return Err(MismatchError(m.len()).into());
        }
        println!("equivalence: simulator matches golden model bit for bit");
    }
    Ok(())
}
