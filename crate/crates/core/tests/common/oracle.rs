use ndarray::{Array2, ArrayView2};
use pcnflow::fixnum::FixFormat;
use pcnflow::golden::{
    Activation, Aggregation, Arith, CondensationParams, DenseLayer, EdgeWeighting, GravNetLayer,
    SelectionVariant,
};

pub const NONE: usize = usize::MAX;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for c in 0..a.len() {
        s += (a[c] - b[c]) * (a[c] - b[c]);
    }
    s
}

fn row(x: ArrayView2<f64>, i: usize) -> Vec<f64> {
    x.row(i).to_vec()
}

/// All pairwise distances of the live rows.
pub fn distance_matrix(x: ArrayView2<f64>, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| sq(&row(x, i), &row(x, j))).collect())
        .collect()
}

/// Full sort of every other live point by `(d2, index)`, truncated to `k`.
pub fn knn(s: ArrayView2<f64>, n: usize, k: usize) -> Vec<Vec<(usize, f64)>> {
    let d = distance_matrix(s, n);
    (0..s.nrows())
        .map(|i| {
            let mut all: Vec<(usize, f64)> = if i < n {
                (0..n).filter(|&j| j != i).map(|j| (j, d[i][j])).collect()
            } else {
                Vec::new()
            };
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            while all.len() < k {
                all.push((NONE, f64::INFINITY));
            }
            all
        })
        .collect()
}

/// `rho_i = min over higher-priority j of ||c_i - c_j||`.
pub fn isolation(beta: &[f64], coords: ArrayView2<f64>, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut best = f64::INFINITY;
            for j in 0..n {
                let higher = beta[j] > beta[i] || (beta[j] == beta[i] && j < i);
                if higher {
                    best = best.min(sq(&row(coords, i), &row(coords, j)).sqrt());
                }
            }
            best
        })
        .collect()
}

/// `(flags, ids, points)` straight from the selection and assignment rules.
pub fn condense(
    beta: &[f64],
    coords: ArrayView2<f64>,
    p: &CondensationParams,
    n: usize,
) -> (Vec<bool>, Vec<i64>, Vec<usize>) {
    let dist = |i: usize, j: usize| sq(&row(coords, i), &row(coords, j)).sqrt();
    let mut flags = vec![false; n];
    match p.variant {
        SelectionVariant::Isolation => {
            let rho = isolation(beta, coords, n);
            for i in 0..n {
                flags[i] = beta[i] > p.t_beta && rho[i] > p.t_dist;
            }
        }
        SelectionVariant::Greedy => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| beta[b].partial_cmp(&beta[a]).unwrap().then(a.cmp(&b)));
            let mut chosen = Vec::new();
            for i in order {
                if beta[i] > p.t_beta && chosen.iter().all(|&s| dist(i, s) > p.t_dist) {
                    chosen.push(i);
                    flags[i] = true;
                }
            }
        }
    }
    let points: Vec<usize> = (0..n).filter(|&i| flags[i]).collect();
    let ids = (0..n)
        .map(|i| {
            if let Some(pos) = points.iter().position(|&s| s == i) {
                return pos as i64;
            }
            if beta[i] <= 0.0 {
                return -1;
            }
            let mut best = -1i64;
            let mut best_d = f64::INFINITY;
            for (pos, &s) in points.iter().enumerate() {
                let d = dist(i, s);
                if d <= p.t_dist && d < best_d {
                    best = pos as i64;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    (flags, ids, points)
}

/// Round `raw * 2^-from` to `to` fraction bits, ties to even.
pub fn round_even(raw: i128, from: u32, to: u32) -> i128 {
    if to >= from {
        return raw << (to - from);
    }
    let den = 1i128 << (from - to);
    let q = raw.div_euclid(den);
    let r = raw.rem_euclid(den);
    if 2 * r > den || (2 * r == den && q % 2 != 0) {
        q + 1
    } else {
        q
    }
}

fn clamp(raw: i128, f: FixFormat) -> i128 {
    let hi = (1i128 << (f.word_bits - 1)) - 1;
    raw.clamp(-hi - 1, hi)
}

fn raw_of(v: f64, frac: u32) -> i128 {
    let s = v * 2f64.powi(frac as i32);
    assert_eq!(s, s.trunc(), "{v} off the {frac}-bit grid");
    s as i128
}

fn val(raw: i128, frac: u32) -> f64 {
    raw as f64 / 2f64.powi(frac as i32)
}

/// Naive matrix product over the live rows, in the layer's arithmetic.
pub fn dense(x: ArrayView2<f64>, layer: &DenseLayer, n: usize) -> Array2<f64> {
    let p = &layer.params;
    let mut out = Array2::zeros((x.nrows(), p.out_dim()));
    for i in 0..n {
        for o in 0..p.out_dim() {
            let v = match layer.arith {
                Arith::Real => {
                    let mut acc = p.bias[o];
                    for c in 0..p.in_dim() {
                        acc += x[[i, c]] * p.weights[[c, o]];
                    }
                    acc
                }
                Arith::Fixed(f) => {
                    let (fi, fw, fa) = (f.input.frac_bits, f.weight.frac_bits, f.act.frac_bits);
                    let wide = (fi + fw).max(fa);
                    let mut acc = raw_of(p.bias[o], fa) << (wide - fa);
                    for c in 0..p.in_dim() {
                        acc += (raw_of(x[[i, c]], fi) * raw_of(p.weights[[c, o]], fw))
                            << (wide - fi - fw);
                    }
                    val(clamp(round_even(acc, wide, fa), f.act), fa)
                }
            };
            out[[i, o]] = match p.activation {
                Activation::Relu => v.max(0.0),
                Activation::None => v,
            };
        }
    }
    out
}

/// GravNet on an explicit `n x n` distance matrix: full neighbour sort,
/// exponential weights, then max / sum / mean of `w_j * f_j` per feature.
/// Empty neighbour slots contribute a zero message.
pub fn gravnet(x: ArrayView2<f64>, layer: &GravNetLayer, n: usize) -> Array2<f64> {
    let s = dense(x, &layer.coords, n);
    let f = dense(x, &layer.features, n);
    let d = distance_matrix(s.view(), n);
    let (k, d_f) = (layer.k, layer.d_f());
    let mut out = Array2::zeros((x.nrows(), layer.out_dim()));
    for i in 0..x.nrows() {
        let mut nb: Vec<(f64, usize)> = if i < n {
            (0..n).filter(|&j| j != i).map(|j| (d[i][j], j)).collect()
        } else {
            Vec::new()
        };
        nb.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nb.truncate(k);
        for (a_idx, &agg) in layer.aggregations.iter().enumerate() {
            for c in 0..d_f {
                out[[i, a_idx * d_f + c]] = match (&layer.weighting, layer.out_format) {
                    (EdgeWeighting::Exact { alpha }, _) => {
                        let mut m: Vec<f64> = nb
                            .iter()
                            .map(|&(dd, j)| (-alpha * dd).exp() * f[[j, c]])
                            .collect();
                        m.resize(k, 0.0);
                        match agg {
                            Aggregation::Max => m.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                            Aggregation::Sum => m.iter().sum(),
                            Aggregation::Mean => m.iter().sum::<f64>() / k as f64,
                        }
                    }
                    (EdgeWeighting::Table(lut), Some(act)) => {
                        let cfg = lut.config();
                        let wf = lut.out_format();
                        let weight_raw = |dd: f64| -> i128 {
                            if dd >= cfg.clamp_max {
                                return 0;
                            }
                            let bin = cfg.clamp_max / (1u64 << cfg.input_bits) as f64;
                            let addr = ((dd / bin).round_ties_even() as u64)
                                .min((1u64 << cfg.input_bits) - 1);
                            let e = (-cfg.alpha * addr as f64 * bin).exp();
                            clamp(
                                (e * 2f64.powi(wf.frac_bits as i32)).round_ties_even() as i128,
                                wf,
                            )
                        };
                        let fa = f_frac(layer);
                        let frac = wf.frac_bits + fa;
                        let mut m: Vec<i128> = nb
                            .iter()
                            .map(|&(dd, j)| weight_raw(dd) * raw_of(f[[j, c]], fa))
                            .collect();
                        m.resize(k, 0);
                        let raw = match agg {
                            Aggregation::Max => clamp(
                                round_even(*m.iter().max().unwrap(), frac, act.frac_bits),
                                act,
                            ),
                            Aggregation::Sum => {
                                clamp(round_even(m.iter().sum(), frac, act.frac_bits), act)
                            }
                            Aggregation::Mean => {
                                let total: i128 = m.iter().sum();
                                let shift = frac - act.frac_bits;
                                let den = (k as i128) << shift;
                                let q = total.div_euclid(den);
                                let r = total.rem_euclid(den);
                                let q = if 2 * r > den || (2 * r == den && q % 2 != 0) {
                                    q + 1
                                } else {
                                    q
                                };
                                clamp(q, act)
                            }
                        };
                        val(raw, act.frac_bits)
                    }
                    _ => unreachable!("table weighting implies fixed formats"),
                };
            }
        }
    }
    out
}

fn f_frac(layer: &GravNetLayer) -> u32 {
    match layer.features.arith {
        Arith::Fixed(f) => f.act.frac_bits,
        Arith::Real => unreachable!(),
    }
}
