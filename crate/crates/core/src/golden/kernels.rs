//! Row-level operator kernels.
//!
//! Both the golden model and the simulator's functional tokens are built from
//! these functions, so a row computed by either path goes through exactly the
//! same arithmetic in the same order.
//!
//! Row encodings between GravNet stages (`k` neighbour slots, `d_f` features):
//!
//! ```text
//! distance: d2[n_bar]                 (+inf for self, padding and dead rows)
//! knn:      idx[k] | d2[k]            (idx -1 for an empty slot)
//! exp:      idx[k] | w[k]
//! gather:   w[k]   | f[k * d_f]       (neighbour-major)
//! mult:     m[k * d_f]
//! reduce:   out[d_f]
//! ```
//!
//! Condensation rows carry the head output `h[d_o]` through every stage:
//!
//! ```text
//! squash:    h | beta | coords[c]
//! cond ann:  squash | d2[n_bar]
//! isolation: cond ann | rho2
//! sort:      isolation | rank
//! selection: h | beta | coords[c] | flag | id
//! ```

use ndarray::{Array2, ArrayView2};

use super::config::{Activation, Aggregation, CondensationParams, SelectionVariant};
use super::model::{Arith, CondensationLayer, DenseLayer, EdgeWeighting, GravNetLayer};
use crate::fixnum::{pow2, Accumulator, FixFormat};

/// Index of an empty neighbour slot.
pub const NO_NEIGHBOR: usize = usize::MAX;

const NO_NEIGHBOR_CODE: f64 = -1.0;

// ---------------------------------------------------------------- dense

/// `activation(x . W + b)` for one point. Accumulation runs in ascending input
/// index starting from the bias.
pub fn dense_row(layer: &DenseLayer, x: &[f64]) -> Vec<f64> {
    let p = &layer.params;
    debug_assert_eq!(x.len(), p.in_dim());
    let mut out = Vec::with_capacity(p.out_dim());
    match layer.arith {
        Arith::Real => {
            for o in 0..p.out_dim() {
                let mut acc = p.bias[o];
                for (i, &xi) in x.iter().enumerate() {
                    acc += xi * p.weights[[i, o]];
                }
                out.push(activate(p.activation, acc));
            }
        }
        Arith::Fixed(f) => {
            let frac = (f.input.frac_bits + f.weight.frac_bits).max(f.act.frac_bits);
            let xs: Vec<i64> = x.iter().map(|&v| f.input.to_raw(v)).collect();
            for o in 0..p.out_dim() {
                let mut acc = Accumulator::new(frac);
                acc.add_raw(f.act.to_raw(p.bias[o]) as i128, f.act.frac_bits);
                for (i, &xi) in xs.iter().enumerate() {
                    let w = f.weight.to_raw(p.weights[[i, o]]);
                    acc.add_product(xi, f.input.frac_bits, w, f.weight.frac_bits);
                }
                out.push(activate(p.activation, acc.finish(f.act).to_f64()));
            }
        }
    }
    out
}

/// [`dense_row`] that yields zeros for padding rows.
pub fn dense_row_masked(layer: &DenseLayer, x: &[f64], live: bool) -> Vec<f64> {
    if live {
        dense_row(layer, x)
    } else {
        vec![0.0; layer.params.out_dim()]
    }
}

fn activate(act: Activation, v: f64) -> f64 {
    match act {
        Activation::Relu => v.max(0.0),
        Activation::None => v,
    }
}

// ---------------------------------------------------------------- distances

/// Squared Euclidean distance, summed in ascending dimension order. Exact
/// for fixed-point inputs.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Squared distances from point `i` to every row of `points`. Self, rows at
/// or beyond `n`, and every entry of a dead row `i >= n` are `+inf`.
pub fn distance_row(points: ArrayView2<f64>, i: usize, n: usize) -> Vec<f64> {
    let mut row = vec![f64::INFINITY; points.nrows()];
    if i >= n {
        return row;
    }
    let pi = points.row(i);
    let pi = pi
        .as_slice()
        .map(|s| s.to_vec())
        .unwrap_or_else(|| pi.to_vec());
    for (j, slot) in row.iter_mut().enumerate().take(n) {
        if j != i {
            let pj = points.row(j).to_vec();
            *slot = sq_dist(&pi, &pj);
        }
    }
    row
}

// ---------------------------------------------------------------- GravNet

/// The `k` smallest finite entries as `(index, d2)`, ascending distance,
/// lower index first on ties; missing slots are `(NO_NEIGHBOR, +inf)`.
pub fn top_k(d2: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut cand: Vec<(usize, f64)> = d2
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .collect();
    cand.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    cand.truncate(k);
    cand.resize(k, (NO_NEIGHBOR, f64::INFINITY));
    cand
}

pub fn knn_row(d2: &[f64], k: usize) -> Vec<f64> {
    let nb = top_k(d2, k);
    let mut row = Vec::with_capacity(2 * k);
    row.extend(nb.iter().map(|&(j, _)| encode_index(j)));
    row.extend(nb.iter().map(|&(_, d)| d));
    row
}

pub fn encode_index(j: usize) -> f64 {
    if j == NO_NEIGHBOR {
        NO_NEIGHBOR_CODE
    } else {
        j as f64
    }
}

pub fn decode_index(v: f64) -> usize {
    if v < 0.0 {
        NO_NEIGHBOR
    } else {
        v as usize
    }
}

/// `exp(-alpha * d2)`; an empty slot (`d2 = +inf`) weighs zero.
pub fn edge_weight(weighting: &EdgeWeighting, d2: f64) -> f64 {
    match weighting {
        EdgeWeighting::Exact { alpha } => {
            if d2.is_finite() {
                (-alpha * d2).exp()
            } else {
                0.0
            }
        }
        EdgeWeighting::Table(lut) => lut.lookup_nonneg(d2).to_f64(),
    }
}

pub fn exp_row(layer: &GravNetLayer, knn: &[f64]) -> Vec<f64> {
    let k = layer.k;
    let mut row = knn[..k].to_vec();
    row.extend(
        knn[k..2 * k]
            .iter()
            .map(|&d| edge_weight(&layer.weighting, d)),
    );
    row
}

/// Fetch the feature rows of the selected neighbours. Empty slots read zeros.
pub fn gather_row(layer: &GravNetLayer, exp: &[f64], features: ArrayView2<f64>) -> Vec<f64> {
    let (k, d_f) = (layer.k, layer.d_f());
    let mut row = exp[k..2 * k].to_vec();
    row.reserve(k * d_f);
    for &code in &exp[..k] {
        match decode_index(code) {
            NO_NEIGHBOR => row.extend(std::iter::repeat_n(0.0, d_f)),
            j => row.extend(features.row(j).iter().copied()),
        }
    }
    row
}

/// Messages `w_j * f_j`. Exact in fixed mode: the product of a weight and an
/// activation fits the f64 mantissa.
pub fn mult_row(layer: &GravNetLayer, gathered: &[f64]) -> Vec<f64> {
    let (k, d_f) = (layer.k, layer.d_f());
    let (w, f) = gathered.split_at(k);
    (0..k * d_f).map(|e| w[e / d_f] * f[e]).collect()
}

/// Reduce the `k` messages of each feature. Fixed mode reduces exactly and
/// rounds once into the layer's activation format.
pub fn reduce_row(layer: &GravNetLayer, agg: Aggregation, msgs: &[f64]) -> Vec<f64> {
    let (k, d_f) = (layer.k, layer.d_f());
    let column = |c: usize| (0..k).map(move |j| msgs[j * d_f + c]);
    match (layer.out_format, layer.message_frac()) {
        (Some(out), Some(frac)) => (0..d_f)
            .map(|c| match agg {
                Aggregation::Max => {
                    let m = column(c).fold(f64::NEG_INFINITY, f64::max);
                    out.round_value(m)
                }
                Aggregation::Sum | Aggregation::Mean => {
                    let mut acc = Accumulator::new(frac);
                    let scale = pow2(frac as i32);
                    for m in column(c) {
                        acc.add_raw((m * scale) as i128, frac);
                    }
                    if agg == Aggregation::Sum {
                        acc.finish(out).to_f64()
                    } else {
                        acc.finish_div(k as i128, out).to_f64()
                    }
                }
            })
            .collect(),
        _ => (0..d_f)
            .map(|c| match agg {
                Aggregation::Max => column(c).fold(f64::NEG_INFINITY, f64::max),
                Aggregation::Sum => column(c).fold(0.0, |a, m| a + m),
                Aggregation::Mean => column(c).fold(0.0, |a, m| a + m) / k as f64,
            })
            .collect(),
    }
}

/// Full GravNet output row for point `i` given its squared distances.
pub fn gravnet_row(layer: &GravNetLayer, d2: &[f64], features: ArrayView2<f64>) -> Vec<f64> {
    let knn = knn_row(d2, layer.k);
    let exp = exp_row(layer, &knn);
    let gathered = gather_row(layer, &exp, features);
    let msgs = mult_row(layer, &gathered);
    layer
        .aggregations
        .iter()
        .flat_map(|&a| reduce_row(layer, a, &msgs))
        .collect()
}

// ---------------------------------------------------------------- condensation

/// Column layout of condensation rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CondLayout {
    pub d_o: usize,
    pub c: usize,
}

impl CondLayout {
    pub fn of(layer: &CondensationLayer) -> Self {
        CondLayout {
            d_o: layer.in_dim,
            c: layer.params.cluster_dims,
        }
    }

    pub fn beta(&self) -> usize {
        self.d_o
    }

    pub fn coords(&self) -> std::ops::Range<usize> {
        self.d_o + 1..self.d_o + 1 + self.c
    }

    /// Width of a squash row (and the prefix every later row keeps).
    pub fn squash_width(&self) -> usize {
        self.d_o + 1 + self.c
    }

    pub fn selection_width(&self) -> usize {
        self.squash_width() + 2
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `h | beta | coords` for one point. Padding rows are all zero.
pub fn squash_row(layer: &CondensationLayer, h: &[f64], live: bool) -> Vec<f64> {
    let lay = CondLayout::of(layer);
    if !live {
        return vec![0.0; lay.squash_width()];
    }
    let p = &layer.params;
    let beta = sigmoid(h[p.beta_index]);
    let beta = match layer.beta_format {
        Some(f) => f.round_value(beta),
        None => beta,
    };
    let mut row = h.to_vec();
    row.push(beta);
    row.extend_from_slice(&h[p.coord_start..p.coord_start + p.cluster_dims]);
    row
}

/// Whether `j` outranks `i`: larger beta, or equal beta and lower index.
pub fn outranks(beta: &[f64], j: usize, i: usize) -> bool {
    beta[j] > beta[i] || (beta[j] == beta[i] && j < i)
}

/// Squared isolation: distance to the nearest higher-priority live point,
/// `+inf` for the top point and for padding. `d2` must be the pairwise
/// distance matrix from [`distance_row`].
pub fn isolation_sq(beta: &[f64], d2: ArrayView2<f64>, n: usize) -> Vec<f64> {
    let mut rho = vec![f64::INFINITY; d2.nrows()];
    for (i, r) in rho.iter_mut().enumerate().take(n) {
        for j in 0..n {
            if j != i && outranks(beta, j, i) {
                *r = r.min(d2[[i, j]]);
            }
        }
    }
    rho
}

/// Live points by descending beta, then ascending index.
pub fn priority_order(beta: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| beta[b].total_cmp(&beta[a]).then(a.cmp(&b)));
    order
}

/// Rank of every row in priority order; padding rows keep their own index.
pub fn priority_rank(beta: &[f64], n: usize) -> Vec<usize> {
    let mut rank: Vec<usize> = (0..beta.len()).collect();
    for (pos, i) in priority_order(beta, n).into_iter().enumerate() {
        rank[i] = pos;
    }
    rank
}

/// Outcome of condensation point selection.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    pub flags: Vec<bool>,
    /// Cluster id per point, `-1` when unassigned.
    pub ids: Vec<i64>,
    /// Condensation points in ascending index; a cluster id is a position here.
    pub points: Vec<usize>,
}

/// Select condensation points and assign the remaining points.
///
/// `rho2` is only read by the isolation variant and `order` only by the
/// greedy one.
pub fn select(
    params: &CondensationParams,
    beta: &[f64],
    d2: ArrayView2<f64>,
    rho2: &[f64],
    order: &[usize],
    n: usize,
) -> Selection {
    let t_dist2 = params.t_dist * params.t_dist;
    let mut flags = vec![false; beta.len()];
    match params.variant {
        SelectionVariant::Isolation => {
            for i in 0..n {
                flags[i] = beta[i] > params.t_beta && rho2[i] > t_dist2;
            }
        }
        SelectionVariant::Greedy => {
            let mut chosen: Vec<usize> = Vec::new();
            for &i in order {
                if beta[i] > params.t_beta && chosen.iter().all(|&s| d2[[i, s]] > t_dist2) {
                    chosen.push(i);
                    flags[i] = true;
                }
            }
        }
    }
    let points: Vec<usize> = (0..n).filter(|&i| flags[i]).collect();
    let mut ids = vec![-1i64; beta.len()];
    for i in 0..n {
        if flags[i] {
            ids[i] = points.binary_search(&i).expect("flagged point listed") as i64;
        } else if beta[i] > 0.0 {
            let mut best: Option<(usize, f64)> = None;
            for (pos, &s) in points.iter().enumerate() {
                let d = d2[[i, s]];
                if d <= t_dist2 && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((pos, d));
                }
            }
            if let Some((pos, _)) = best {
                ids[i] = pos as i64;
            }
        }
    }
    Selection { flags, ids, points }
}

/// Whole-event condensation on squash rows: returns the selection rows.
pub fn condense_rows(layer: &CondensationLayer, squash: ArrayView2<f64>, n: usize) -> Array2<f64> {
    let lay = CondLayout::of(layer);
    let coords = squash.slice(ndarray::s![.., lay.coords()]);
    let d2 = pairwise_sq(coords, n);
    let beta: Vec<f64> = squash.column(lay.beta()).to_vec();
    let rho2 = isolation_sq(&beta, d2.view(), n);
    let order = priority_order(&beta, n);
    let sel = select(&layer.params, &beta, d2.view(), &rho2, &order, n);
    selection_rows(lay, squash, &sel)
}

pub fn pairwise_sq(points: ArrayView2<f64>, n: usize) -> Array2<f64> {
    let n_bar = points.nrows();
    let mut d2 = Array2::from_elem((n_bar, n_bar), f64::INFINITY);
    for i in 0..n_bar {
        let row = distance_row(points, i, n);
        d2.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    d2
}

/// Final rows `h | beta | coords | flag | id`.
pub fn selection_rows(lay: CondLayout, squash: ArrayView2<f64>, sel: &Selection) -> Array2<f64> {
    let w = lay.squash_width();
    let mut out = Array2::zeros((squash.nrows(), lay.selection_width()));
    for i in 0..squash.nrows() {
        for c in 0..w {
            out[[i, c]] = squash[[i, c]];
        }
        out[[i, w]] = if sel.flags[i] { 1.0 } else { 0.0 };
        out[[i, w + 1]] = sel.ids[i] as f64;
    }
    out
}

/// Quantize a value onto a format grid when one is given.
pub fn on_grid(fmt: Option<FixFormat>, v: f64) -> f64 {
    fmt.map_or(v, |f| f.round_value(v))
}
