//! Whole-tensor operators and the end-to-end golden run.

use ndarray::{Array2, ArrayView2};

use super::config::CondensationParams;
use super::kernels::{self, CondLayout, Selection, NO_NEIGHBOR};
use super::model::{CondensationLayer, DenseLayer, GravNetLayer, Model, PreparedLayer};
use super::result::InferenceResult;
use crate::error::{Error, Result};
use crate::events::CompactEvent;

/// Apply a dense layer to rows `[0, n)`; rows at or beyond `n` stay zero.
pub fn dense_forward(x: ArrayView2<f64>, layer: &DenseLayer, n: usize) -> Result<Array2<f64>> {
    if x.ncols() != layer.params.in_dim() {
        return Err(Error::config(format!(
            "dense layer expects {} inputs, got {}",
            layer.params.in_dim(),
            x.ncols()
        )));
    }
    let mut out = Array2::zeros((x.nrows(), layer.params.out_dim()));
    for i in 0..n.min(x.nrows()) {
        let row = kernels::dense_row(layer, &x.row(i).to_vec());
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    Ok(out)
}

/// k nearest other points of every row. Empty slots hold [`NO_NEIGHBOR`]
/// and `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnResult {
    pub indices: Array2<usize>,
    pub sq_dists: Array2<f64>,
}

pub fn knn_all(s: ArrayView2<f64>, n: usize, k: usize) -> KnnResult {
    let rows = s.nrows();
    let mut indices = Array2::from_elem((rows, k), NO_NEIGHBOR);
    let mut sq_dists = Array2::from_elem((rows, k), f64::INFINITY);
    for i in 0..rows {
        let d2 = kernels::distance_row(s, i, n);
        for (slot, (j, d)) in kernels::top_k(&d2, k).into_iter().enumerate() {
            indices[[i, slot]] = j;
            sq_dists[[i, slot]] = d;
        }
    }
    KnnResult { indices, sq_dists }
}

pub fn gravnet_forward(x: ArrayView2<f64>, layer: &GravNetLayer, n: usize) -> Result<Array2<f64>> {
    let s = dense_forward(x, &layer.coords, n)?;
    let f = dense_forward(x, &layer.features, n)?;
    let mut out = Array2::zeros((x.nrows(), layer.out_dim()));
    for i in 0..x.nrows() {
        let d2 = kernels::distance_row(s.view(), i, n);
        let row = kernels::gravnet_row(layer, &d2, f.view());
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    Ok(out)
}

/// Euclidean isolation of every live point.
pub fn isolation(beta: &[f64], coords: ArrayView2<f64>, n: usize) -> Vec<f64> {
    let d2 = kernels::pairwise_sq(coords, n);
    kernels::isolation_sq(beta, d2.view(), n)[..n]
        .iter()
        .map(|r| r.sqrt())
        .collect()
}

pub fn condense(
    beta: &[f64],
    coords: ArrayView2<f64>,
    params: &CondensationParams,
    n: usize,
) -> Selection {
    let d2 = kernels::pairwise_sq(coords, n);
    let rho2 = kernels::isolation_sq(beta, d2.view(), n);
    let order = kernels::priority_order(beta, n);
    let mut sel = kernels::select(params, beta, d2.view(), &rho2, &order, n);
    sel.flags.truncate(n);
    sel.ids.truncate(n);
    sel
}

fn squash_forward(x: ArrayView2<f64>, layer: &CondensationLayer, n: usize) -> Array2<f64> {
    let lay = CondLayout::of(layer);
    let mut out = Array2::zeros((x.nrows(), lay.squash_width()));
    for i in 0..x.nrows() {
        let row = kernels::squash_row(layer, &x.row(i).to_vec(), i < n);
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    out
}

fn check_event(model: &Model, event: &CompactEvent) -> Result<()> {
    let cfg = model.config();
    if event.f_dim() != cfg.input_dim {
        return Err(Error::data(format!(
            "event has {} features, network expects {}",
            event.f_dim(),
            cfg.input_dim
        )));
    }
    if event.n > event.n_bar() {
        return Err(Error::data(format!(
            "event holds {} points but capacity is {}",
            event.n,
            event.n_bar()
        )));
    }
    if cfg.max_k() >= event.n_bar() {
        return Err(Error::config(format!(
            "k = {} must be below the event capacity {}",
            cfg.max_k(),
            event.n_bar()
        )));
    }
    Ok(())
}

/// Run every layer, returning the tensor after each one. The last entry holds
/// the selection rows `h | beta | coords | flag | id`.
pub fn run_network_trace(model: &Model, event: &CompactEvent) -> Result<Vec<Array2<f64>>> {
    check_event(model, event)?;
    let n = event.n;
    let mut x = model.prepare_input(event.x.view());
    for r in n..x.nrows() {
        x.row_mut(r).fill(0.0);
    }
    let mut trace = Vec::with_capacity(model.layers().len());
    for layer in model.layers() {
        x = match layer {
            PreparedLayer::Dense(d) => dense_forward(x.view(), d, n)?,
            PreparedLayer::GravNet(g) => gravnet_forward(x.view(), g, n)?,
            PreparedLayer::Condensation(c) => {
                let squash = squash_forward(x.view(), c, n);
                kernels::condense_rows(c, squash.view(), n)
            }
        };
        trace.push(x.clone());
    }
    Ok(trace)
}

pub fn run_network(model: &Model, event: &CompactEvent) -> Result<InferenceResult> {
    let trace = run_network_trace(model, event)?;
    let rows = trace.last().expect("network has layers");
    Ok(InferenceResult::from_rows(
        rows.view(),
        event.n,
        CondLayout::of(model.condensation()),
    ))
}

/// Largest absolute difference between the per-point head outputs of two
/// results for the same event.
pub fn max_abs_deviation(a: &InferenceResult, b: &InferenceResult) -> f64 {
    a.outputs
        .iter()
        .zip(&b.outputs)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden::config::{
        Activation, Aggregation, NetworkConfig, Precision, SelectionVariant,
    };
    use crate::golden::model::{DenseParams, EdgeWeighting};
    use ndarray::{array, Array1};

    fn identity_dense() -> DenseLayer {
        DenseLayer::real(DenseParams {
            weights: Array2::eye(2),
            bias: Array1::zeros(2),
            activation: Activation::Relu,
        })
    }

    #[test]
    fn dense_identity_relu() {
        let out = dense_forward(array![[-1.0, 2.0]].view(), &identity_dense(), 1).unwrap();
        assert_eq!(out, array![[0.0, 2.0]]);
        let none = dense_forward(array![[-1.0, 2.0]].view(), &identity_dense(), 0).unwrap();
        assert_eq!(none, array![[0.0, 0.0]]);
    }

    #[test]
    fn dense_rejects_wrong_width() {
        let x = Array2::zeros((2, 3));
        assert!(matches!(
            dense_forward(x.view(), &identity_dense(), 2),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn knn_collinear() {
        let s = array![[0.0], [1.0], [3.0]];
        let r = knn_all(s.view(), 3, 2);
        assert_eq!(r.indices.row(0).to_vec(), vec![1, 2]);
        assert_eq!(r.sq_dists.row(0).to_vec(), vec![1.0, 9.0]);
    }

    #[test]
    fn knn_single_point_is_all_sentinel() {
        let s = Array2::zeros((10, 3));
        let r = knn_all(s.view(), 1, 8);
        assert!(r.indices.row(0).iter().all(|&j| j == NO_NEIGHBOR));
        assert!(r.sq_dists.row(0).iter().all(|d| d.is_infinite()));
    }

    fn unit_gravnet(k: usize) -> GravNetLayer {
        let eye = |n| {
            DenseLayer::real(DenseParams {
                weights: Array2::eye(n),
                bias: Array1::zeros(n),
                activation: Activation::None,
            })
        };
        GravNetLayer {
            coords: eye(2),
            features: eye(2),
            k,
            aggregations: vec![Aggregation::Max, Aggregation::Sum],
            weighting: EdgeWeighting::Exact { alpha: 10.0 },
            out_format: None,
        }
    }

    #[test]
    fn gravnet_identical_points() {
        let x = array![[0.3, 0.7], [0.3, 0.7], [0.0, 0.0]];
        let out = gravnet_forward(x.view(), &unit_gravnet(1), 2).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![0.3, 0.7, 0.3, 0.7]);
        assert_eq!(out.row(2).to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn gravnet_lonely_point_is_zero() {
        let x = array![[0.3, 0.7], [0.0, 0.0]];
        let out = gravnet_forward(x.view(), &unit_gravnet(1), 1).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn isolation_examples() {
        assert_eq!(
            isolation(&[0.7], array![[0.0, 0.0]].view(), 1),
            vec![f64::INFINITY]
        );
        let rho = isolation(&[0.9, 0.5], array![[0.0, 0.0], [2.0, 0.0]].view(), 2);
        assert_eq!(rho, vec![f64::INFINITY, 2.0]);
    }

    #[test]
    fn isolation_and_greedy_diverge() {
        let beta = [0.9, 0.8, 0.7];
        let coords = array![[0.0, 0.0], [0.4, 0.0], [0.8, 0.0]];
        let mut p = CondensationParams::default();
        let iso = condense(&beta, coords.view(), &p, 3);
        assert_eq!(iso.points, vec![0]);
        assert_eq!(iso.ids, vec![0, 0, -1]);
        p.variant = SelectionVariant::Greedy;
        let greedy = condense(&beta, coords.view(), &p, 3);
        assert_eq!(greedy.points, vec![0, 2]);
        assert_eq!(greedy.ids, vec![0, 0, 1]);
    }

    #[test]
    fn condense_thresholds() {
        let p = CondensationParams::default();
        let one = condense(&[0.8], array![[1.0, 1.0]].view(), &p, 1);
        assert_eq!((one.flags, one.ids), (vec![true], vec![0]));
        let low = condense(&[0.2, 0.4], array![[0.0, 0.0], [5.0, 5.0]].view(), &p, 2);
        assert!(low.points.is_empty());
        assert_eq!(low.ids, vec![-1, -1]);
    }

    fn event(n: usize, n_bar: usize) -> CompactEvent {
        let mut ev = CompactEvent::empty(n_bar, 5);
        for i in 0..n {
            for c in 0..5 {
                ev.x[[i, c]] = ((i * 7 + c * 3) % 11) as f64 / 5.0 - 1.0;
            }
            ev.y[i] = i as u32;
        }
        ev.n = n;
        ev
    }

    #[test]
    fn empty_event_gives_empty_result() {
        let model = Model::from_config(&NetworkConfig::reference()).unwrap();
        let r = run_network(&model, &event(0, 32)).unwrap();
        assert_eq!(r, InferenceResult::empty());
    }

    #[test]
    fn fixed_run_is_deterministic_and_consistent() {
        let model = Model::from_config(&NetworkConfig::reference()).unwrap();
        let ev = event(20, 32);
        let a = run_network(&model, &ev).unwrap();
        let b = run_network(&model, &ev).unwrap();
        assert_eq!(a, b);
        assert!(a.is_consistent());
        assert_eq!(a.outputs.len(), 20);
    }

    #[test]
    fn real_and_fixed_stay_close() {
        let ev = event(24, 32);
        let fixed = Model::from_config(&NetworkConfig::reference()).unwrap();
        let real = Model::from_config(&NetworkConfig::reference().with_precision(Precision::Real))
            .unwrap();
        let dev = max_abs_deviation(
            &run_network(&real, &ev).unwrap(),
            &run_network(&fixed, &ev).unwrap(),
        );
        assert!(dev.is_finite() && dev < 2.0, "{dev}");
    }

    #[test]
    fn k_must_fit_capacity() {
        let model = Model::from_config(&NetworkConfig::reference()).unwrap();
        assert!(matches!(
            run_network(&model, &event(4, 8)),
            Err(Error::Config(_))
        ));
    }
}
