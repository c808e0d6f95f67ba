//! Cycle-level simulation of a [`DataflowGraph`](crate::dataflow::DataflowGraph).
//!
//! One global clock. Every cycle each actor, in topological order, first
//! tries to emit its oldest finished beat and then to accept one new beat.
//! FIFOs are bounded, so a full FIFO holds its producer back. With a model
//! attached, beats carry real point rows and every actor computes its output
//! with the golden kernels.

mod engine;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataflow::EdgeId;
use crate::golden::InferenceResult;

pub use engine::simulate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Per-edge FIFO capacity overrides, in beats.
    pub fifo_capacity: BTreeMap<EdgeId, usize>,
    /// Events excluded from the steady-state interval measurement.
    pub warmup_events: usize,
    /// Safety bound on simulated cycles.
    pub max_cycles: u64,
    /// Keep per-event traces in the report.
    pub record_trace: bool,
    /// Carry point rows and compute outputs (needs a model).
    pub functional: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            fifo_capacity: BTreeMap::new(),
            warmup_events: 2,
            max_cycles: 1_000_000_000,
            record_trace: true,
            functional: true,
        }
    }
}

impl SimConfig {
    pub fn timing_only() -> Self {
        SimConfig {
            functional: false,
            ..Default::default()
        }
    }
}

/// Cycle stamps of one event. `t_*_in` are taken at the source, `t_*_out` at
/// the sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTrace {
    pub event_id: usize,
    pub n: usize,
    pub t_first_in: u64,
    pub t_last_in: u64,
    pub t_first_out: u64,
    pub t_last_out: u64,
    pub latency_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorStalls {
    pub actor: String,
    pub stall_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub events: usize,
    pub traces: Vec<EventTrace>,
    /// Steady-state cycles between consecutive event completions.
    pub ii_measured: f64,
    pub ii_analytic: u64,
    pub latency_min: u64,
    pub latency_median: u64,
    pub latency_p95: u64,
    pub latency_max: u64,
    pub stalls: Vec<ActorStalls>,
    pub total_stalls: u64,
    pub cycles: u64,
    /// Completion order matched submission order.
    pub in_order: bool,
    #[serde(skip)]
    pub outputs: Vec<InferenceResult>,
}

/// Wall-clock view of a report at a given kernel clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub latency_us: f64,
    pub throughput_eps: f64,
}

pub fn measure(report: &SimReport, f_kernel: f64) -> Measurement {
    Measurement {
        latency_us: report.latency_max as f64 / f_kernel * 1e6,
        throughput_eps: f_kernel / report.ii_measured,
    }
}

/// One disagreement between simulator and golden outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub event: usize,
    pub point: Option<usize>,
    pub field: String,
    pub detail: String,
}

/// Bit-level comparison of simulator outputs against golden results.
pub fn check_equivalence(report: &SimReport, golden: &[InferenceResult]) -> Vec<Mismatch> {
    compare_results(&report.outputs, golden)
}

pub fn compare_results(sim: &[InferenceResult], golden: &[InferenceResult]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    if sim.len() != golden.len() {
        out.push(Mismatch {
            event: sim.len().min(golden.len()),
            point: None,
            field: "events".into(),
            detail: format!(
                "simulator produced {} results, golden {}",
                sim.len(),
                golden.len()
            ),
        });
    }
    for (e, (s, g)) in sim.iter().zip(golden).enumerate() {
        if s.n != g.n {
            out.push(Mismatch {
                event: e,
                point: None,
                field: "n".into(),
                detail: format!("{} vs {}", s.n, g.n),
            });
            continue;
        }
        let mut push = |point, field: &str, detail: String| {
            out.push(Mismatch {
                event: e,
                point: Some(point),
                field: field.into(),
                detail,
            })
        };
        for i in 0..s.n {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            if bits(&s.outputs[i]) != bits(&g.outputs[i]) {
                push(
                    i,
                    "output",
                    format!("{:?} vs {:?}", s.outputs[i], g.outputs[i]),
                );
            }
            if s.beta[i].to_bits() != g.beta[i].to_bits() {
                push(i, "beta", format!("{} vs {}", s.beta[i], g.beta[i]));
            }
            if s.is_condensation_point[i] != g.is_condensation_point[i] {
                push(
                    i,
                    "flag",
                    format!(
                        "{} vs {}",
                        s.is_condensation_point[i], g.is_condensation_point[i]
                    ),
                );
            }
            if s.cluster_id[i] != g.cluster_id[i] {
                push(
                    i,
                    "cluster_id",
                    format!("{} vs {}", s.cluster_id[i], g.cluster_id[i]),
                );
            }
        }
    }
    out
}
