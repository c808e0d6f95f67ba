use serde::{Deserialize, Serialize};

use super::{validate, DataflowGraph};
use crate::error::{Error, Result};

/// Minimum sustained event rate the trigger application needs.
pub const THROUGHPUT_REQUIREMENT_EPS: f64 = 8e6;
/// Maximum per-event latency the trigger application tolerates.
pub const LATENCY_REQUIREMENT_S: f64 = 10e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfEstimate {
    pub ii_cycles: u64,
    pub latency_cycles: u64,
    pub f_kernel: f64,
    pub throughput_eps: f64,
    pub latency_seconds: f64,
    pub meets_throughput_req: bool,
    pub meets_latency_req: bool,
}

impl PerfEstimate {
    pub fn from_cycles(ii_cycles: u64, latency_cycles: u64, f_kernel: f64) -> Self {
        let throughput_eps = f_kernel / ii_cycles as f64;
        let latency_seconds = latency_cycles as f64 / f_kernel;
        PerfEstimate {
            ii_cycles,
            latency_cycles,
            f_kernel,
            throughput_eps,
            latency_seconds,
            meets_throughput_req: throughput_eps >= THROUGHPUT_REQUIREMENT_EPS,
            meets_latency_req: latency_seconds <= LATENCY_REQUIREMENT_S,
        }
    }

    pub fn latency_us(&self) -> f64 {
        self.latency_seconds * 1e6
    }
}

/// Largest sum of actor depths over any source-to-sink path.
pub fn longest_path(g: &DataflowGraph) -> Result<u64> {
    let arr = g.arrival_times()?;
    Ok(g.sinks()
        .into_iter()
        .map(|s| arr[s] + g.actors[s].depth)
        .max()
        .unwrap_or(0))
}

/// Throughput and latency of a validated graph: the last beat of an event
/// leaves `ii - 1` cycles after the first one.
pub fn analytic_perf(g: &DataflowGraph) -> Result<PerfEstimate> {
    let violations = validate(g);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Precondition(format!(
            "graph fails validation: {}",
            list.join("; ")
        )));
    }
    let ii = g.ii();
    let latency = longest_path(g)? + ii - 1;
    Ok(PerfEstimate::from_cycles(ii, latency, g.f_kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::{map_network, ActorKind, ArchParams, DepthTable};
    use crate::golden::NetworkConfig;

    #[test]
    fn table_one_throughputs() {
        for (n_bar, par, f, eps) in [
            (32, 2, 290e6, 18.125e6),
            (64, 2, 280e6, 8.75e6),
            (128, 1, 127e6, 0.9921875e6),
        ] {
            let g = map_network(
                &NetworkConfig::reference(),
                ArchParams {
                    n_bar,
                    par,
                    f_kernel: f,
                },
                &DepthTable::default(),
            )
            .unwrap();
            let p = analytic_perf(&g).unwrap();
            assert_eq!(p.throughput_eps, eps);
            assert_eq!(p.meets_throughput_req, n_bar < 128);
            assert!(p.meets_latency_req);
        }
    }

    #[test]
    fn rejects_invalid_graph() {
        let mut g = DataflowGraph::new(16, 1, 1e8);
        g.add_actor("source", ActorKind::Source, 0);
        assert!(matches!(analytic_perf(&g), Err(Error::Precondition(_))));
    }

    #[test]
    fn latency_counts_drain() {
        let mut g = DataflowGraph::new(16, 4, 1e8);
        let s = g.add_actor("source", ActorKind::Source, 0);
        let f = g.add_actor("fork", ActorKind::Fork, 3);
        let k = g.add_actor("sink", ActorKind::Sink, 0);
        g.connect(s, 0, f, 0, 2);
        g.connect(f, 0, k, 0, 2);
        let p = analytic_perf(&g).unwrap();
        assert_eq!(p.ii_cycles, 4);
        assert_eq!(p.latency_cycles, 3 + 3);
    }
}
