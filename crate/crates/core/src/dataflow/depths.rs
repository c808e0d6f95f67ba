use serde::{Deserialize, Serialize};

use super::{ActorKind, GpeStage, PpeOp};
use crate::golden::Aggregation;

/// `ceil(log2(x))`, with `ceil_log2(0) = ceil_log2(1) = 0`.
pub fn ceil_log2(x: usize) -> u64 {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as u64
    }
}

/// Pipeline depth of every actor kind, in cycles.
///
/// | actor | depth |
/// |---|---|
/// | dense / transform PPE | `dense_base + ceil_log2(out)` |
/// | fork, join, width adapter | `topology` |
/// | ANN | `ii + ann_extra` |
/// | top-k | `ceil_log2(n_bar) + k + topk_extra` |
/// | exp | `exp` |
/// | gather | `ii + gather_extra` |
/// | mult | `mult` |
/// | max reduce | `ceil_log2(k) + reduce_max_extra` |
/// | sum / mean reduce | `ceil_log2(k) + reduce_sum_extra` (`+ mean_divider` for mean) |
/// | squash | `squash` |
/// | condensation ANN | `ii + cond_ann_extra` |
/// | isolation | `ii + ceil_log2(n_bar) + isolation_extra` |
/// | sort | `ii + m (m + 1) / 2 + sort_extra`, `m = ceil_log2(n_bar)` |
/// | selection | `ii + selection_extra` |
/// | source, sink | 0 |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthTable {
    pub dense_base: u64,
    pub topology: u64,
    pub ann_extra: u64,
    pub topk_extra: u64,
    pub exp: u64,
    pub gather_extra: u64,
    pub mult: u64,
    pub reduce_max_extra: u64,
    pub reduce_sum_extra: u64,
    pub mean_divider: u64,
    pub squash: u64,
    pub cond_ann_extra: u64,
    pub isolation_extra: u64,
    pub sort_extra: u64,
    pub selection_extra: u64,
}

impl Default for DepthTable {
    fn default() -> Self {
        DepthTable {
            dense_base: 8,
            topology: 1,
            ann_extra: 4,
            topk_extra: 0,
            exp: 2,
            gather_extra: 2,
            mult: 3,
            reduce_max_extra: 1,
            reduce_sum_extra: 2,
            mean_divider: 4,
            squash: 2,
            cond_ann_extra: 4,
            isolation_extra: 1,
            sort_extra: 0,
            selection_extra: 2,
        }
    }
}

/// Shape facts an actor's depth may depend on.
#[derive(Debug, Clone, Copy)]
pub struct DepthContext {
    pub n_bar: usize,
    pub ii: u64,
    pub out_dim: usize,
    pub k: usize,
}

impl DepthTable {
    pub fn depth(&self, kind: ActorKind, ctx: DepthContext) -> u64 {
        let DepthContext {
            n_bar,
            ii,
            out_dim,
            k,
        } = ctx;
        match kind {
            ActorKind::Source | ActorKind::Sink => 0,
            ActorKind::Fork | ActorKind::Join | ActorKind::WidthAdapter => self.topology,
            ActorKind::Ppe { op, .. } => match op {
                PpeOp::Dense | PpeOp::TransformS | PpeOp::TransformF => {
                    self.dense_base + ceil_log2(out_dim)
                }
            },
            ActorKind::Gpe { stage, .. } => match stage {
                GpeStage::Ann => ii + self.ann_extra,
                GpeStage::TopK => ceil_log2(n_bar) + k as u64 + self.topk_extra,
                GpeStage::Exp => self.exp,
                GpeStage::Gather => ii + self.gather_extra,
                GpeStage::Mult => self.mult,
                GpeStage::Reduce(Aggregation::Max) => ceil_log2(k) + self.reduce_max_extra,
                GpeStage::Reduce(Aggregation::Sum) => ceil_log2(k) + self.reduce_sum_extra,
                GpeStage::Reduce(Aggregation::Mean) => {
                    ceil_log2(k) + self.reduce_sum_extra + self.mean_divider
                }
                GpeStage::Squash => self.squash,
                GpeStage::CondAnn => ii + self.cond_ann_extra,
                GpeStage::Isolation => ii + ceil_log2(n_bar) + self.isolation_extra,
                GpeStage::Sort => {
                    let m = ceil_log2(n_bar);
                    ii + m * (m + 1) / 2 + self.sort_extra
                }
                GpeStage::Selection => ii + self.selection_extra,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_ceiling() {
        let got: Vec<u64> = [0, 1, 2, 3, 4, 5, 8, 9, 32, 33, 128]
            .map(ceil_log2)
            .to_vec();
        assert_eq!(got, vec![0, 0, 1, 2, 2, 3, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn whole_event_stages_cover_an_event() {
        let t = DepthTable::default();
        for (n_bar, par) in [(32usize, 2usize), (64, 2), (128, 1), (128, 2)] {
            let ii = n_bar.div_ceil(par) as u64;
            let ctx = DepthContext {
                n_bar,
                ii,
                out_dim: 8,
                k: 8,
            };
            for stage in [
                GpeStage::Ann,
                GpeStage::Gather,
                GpeStage::CondAnn,
                GpeStage::Isolation,
                GpeStage::Sort,
                GpeStage::Selection,
            ] {
                assert!(t.depth(ActorKind::Gpe { layer: 0, stage }, ctx) >= ii);
            }
        }
    }
}
