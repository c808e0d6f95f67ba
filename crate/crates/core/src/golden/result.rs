use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::kernels::CondLayout;

/// Per-point network output plus the clustering decision for one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub n: usize,
    /// Head output per live point.
    pub outputs: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub cluster_coords: Vec<Vec<f64>>,
    pub is_condensation_point: Vec<bool>,
    /// `-1` marks noise or an unassigned point.
    pub cluster_id: Vec<i64>,
    /// Condensation points in ascending index.
    pub condensation_points: Vec<usize>,
}

impl InferenceResult {
    pub fn empty() -> Self {
        InferenceResult {
            n: 0,
            outputs: Vec::new(),
            beta: Vec::new(),
            cluster_coords: Vec::new(),
            is_condensation_point: Vec::new(),
            cluster_id: Vec::new(),
            condensation_points: Vec::new(),
        }
    }

    /// Assemble from selection rows `h | beta | coords | flag | id`.
    pub fn from_rows(rows: ArrayView2<f64>, n: usize, lay: CondLayout) -> Self {
        let w = lay.squash_width();
        let mut r = InferenceResult::empty();
        r.n = n;
        for i in 0..n {
            let row = rows.row(i);
            r.outputs.push(row.iter().take(lay.d_o).copied().collect());
            r.beta.push(row[lay.beta()]);
            r.cluster_coords
                .push(lay.coords().map(|c| row[c]).collect());
            let flag = row[w] != 0.0;
            r.is_condensation_point.push(flag);
            r.cluster_id.push(row[w + 1] as i64);
            if flag {
                r.condensation_points.push(i);
            }
        }
        r
    }

    pub fn num_clusters(&self) -> usize {
        self.condensation_points.len()
    }

    /// Check the cluster id invariants.
    pub fn is_consistent(&self) -> bool {
        let k = self.condensation_points.len() as i64;
        self.condensation_points
            .iter()
            .enumerate()
            .all(|(pos, &i)| self.cluster_id[i] == pos as i64 && self.is_condensation_point[i])
            && self.cluster_id.iter().all(|&id| (-1..k).contains(&id))
            && self.is_condensation_point.iter().filter(|&&f| f).count()
                == self.condensation_points.len()
    }
}
