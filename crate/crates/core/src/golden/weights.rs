//! Seeded weight initialisation, magnitude pruning and the flat weight blob.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LayerOp, NetworkConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    /// `in x out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Dense(DenseWeights),
    GravNet {
        coords: DenseWeights,
        features: DenseWeights,
    },
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub layers: Vec<LayerWeights>,
}

/// Zero the `ceil(sparsity * numel)` smallest-magnitude entries, ties broken
/// by flat index.
pub fn prune_weights(w: &Array2<f64>, sparsity: f64) -> Array2<f64> {
    let numel = w.len();
    // guard against 0.3 * 10 = 3.0000000000000004
    let count = ((sparsity * numel as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..numel).collect();
    let flat: Vec<f64> = w.iter().copied().collect();
    order.sort_by(|&a, &b| flat[a].abs().total_cmp(&flat[b].abs()).then(a.cmp(&b)));
    let mut out = flat;
    for &i in order.iter().take(count.min(numel)) {
        out[i] = 0.0;
    }
    Array2::from_shape_vec(w.raw_dim(), out).expect("same shape")
}

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, sparsity: f64) -> DenseWeights {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let weight = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit));
    let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-0.1..0.1));
    DenseWeights {
        weight: prune_weights(&weight, sparsity),
        bias,
    }
}

impl NetworkWeights {
    /// Xavier-uniform weights from `weight_seed`, then magnitude pruning.
    pub fn init(cfg: &NetworkConfig) -> Result<Self> {
        let shapes = cfg.check()?;
        let layers = cfg
            .layers
            .iter()
            .zip(&shapes)
            .enumerate()
            .map(|(i, (layer, shape))| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.weight_seed);
                rng.set_stream(i as u64);
                match &layer.op {
                    LayerOp::Dense(d) => LayerWeights::Dense(xavier(
                        &mut rng,
                        shape.in_dim,
                        d.out,
                        cfg.weight_sparsity,
                    )),
                    LayerOp::GravNet(g) => LayerWeights::GravNet {
                        coords: xavier(&mut rng, shape.in_dim, g.d_s, cfg.weight_sparsity),
                        features: xavier(&mut rng, shape.in_dim, g.d_f, cfg.weight_sparsity),
                    },
                    _ => LayerWeights::Empty,
                }
            })
            .collect();
        Ok(NetworkWeights { layers })
    }

    fn tensors<'a>(&'a self, cfg: &NetworkConfig) -> Vec<(String, &'static str, TensorRef<'a>)> {
        let mut out = Vec::new();
        for (def, lw) in cfg.layers.iter().zip(&self.layers) {
            let mut push =
                |name: &'static str, t: TensorRef<'a>| out.push((def.name.clone(), name, t));
            match lw {
                LayerWeights::Dense(d) => {
                    push("weight", TensorRef::Matrix(&d.weight));
                    push("bias", TensorRef::Vector(&d.bias));
                }
                LayerWeights::GravNet { coords, features } => {
                    push("coords_weight", TensorRef::Matrix(&coords.weight));
                    push("coords_bias", TensorRef::Vector(&coords.bias));
                    push("features_weight", TensorRef::Matrix(&features.weight));
                    push("features_bias", TensorRef::Vector(&features.bias));
                }
                LayerWeights::Empty => {}
            }
        }
        out
    }

    /// Flatten into a little-endian f64 blob plus its manifest.
    pub fn to_blob(&self, cfg: &NetworkConfig) -> (Vec<u8>, WeightManifest) {
        let mut blob = Vec::new();
        let mut manifest = WeightManifest {
            format: BLOB_FORMAT.to_string(),
            total: 0,
            tensors: Vec::new(),
        };
        for (layer, name, t) in self.tensors(cfg) {
            let offset = blob.len() / 8;
            let (shape, values): (Vec<usize>, Vec<f64>) = match t {
                TensorRef::Matrix(m) => (m.shape().to_vec(), m.iter().copied().collect()),
                TensorRef::Vector(v) => (vec![v.len()], v.to_vec()),
            };
            for v in &values {
                blob.extend_from_slice(&v.to_le_bytes());
            }
            manifest.tensors.push(TensorEntry {
                layer,
                name: name.to_string(),
                shape,
                offset,
            });
        }
        manifest.total = blob.len() / 8;
        (blob, manifest)
    }

    /// Rebuild from a blob; shapes must match what `cfg` expects.
    pub fn from_blob(cfg: &NetworkConfig, manifest: &WeightManifest, blob: &[u8]) -> Result<Self> {
        if manifest.format != BLOB_FORMAT {
            return Err(Error::data(format!(
                "weight blob format '{}' is not '{BLOB_FORMAT}'",
                manifest.format
            )));
        }
        if blob.len() != manifest.total * 8 {
            return Err(Error::data(format!(
                "weight blob has {} bytes, manifest declares {} values",
                blob.len(),
                manifest.total
            )));
        }
        let template = Self::init(cfg)?;
        let expected = template.tensors(cfg);
        if expected.len() != manifest.tensors.len() {
            return Err(Error::data(format!(
                "manifest lists {} tensors, network needs {}",
                manifest.tensors.len(),
                expected.len()
            )));
        }
        let read =
            |entry: &TensorEntry, layer: &str, name: &str, shape: &[usize]| -> Result<Vec<f64>> {
                if entry.layer != layer || entry.name != name || entry.shape != shape {
                    return Err(Error::data(format!(
                    "manifest entry {}/{} {:?} does not match expected {layer}/{name} {shape:?}",
                    entry.layer, entry.name, entry.shape
                )));
                }
                let len: usize = shape.iter().product();
                let end = entry.offset + len;
                if end > manifest.total {
                    return Err(Error::data(format!(
                        "tensor {layer}/{name} runs past the blob"
                    )));
                }
                Ok(blob[entry.offset * 8..end * 8]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect())
            };
        let mut values = Vec::with_capacity(expected.len());
        for ((layer, name, t), entry) in expected.iter().zip(&manifest.tensors) {
            let shape = match t {
                TensorRef::Matrix(m) => m.shape().to_vec(),
                TensorRef::Vector(v) => vec![v.len()],
            };
            values.push((shape.clone(), read(entry, layer, name, &shape)?));
        }
        let mut it = values.into_iter();
        let take_dense = |it: &mut std::vec::IntoIter<(Vec<usize>, Vec<f64>)>| {
            let (ws, wv) = it.next().expect("counted");
            let (_, bv) = it.next().expect("counted");
            DenseWeights {
                weight: Array2::from_shape_vec((ws[0], ws[1]), wv).expect("shape checked"),
                bias: Array1::from_vec(bv),
            }
        };
        let layers = template
            .layers
            .iter()
            .map(|lw| match lw {
                LayerWeights::Dense(_) => LayerWeights::Dense(take_dense(&mut it)),
                LayerWeights::GravNet { .. } => LayerWeights::GravNet {
                    coords: take_dense(&mut it),
                    features: take_dense(&mut it),
                },
                LayerWeights::Empty => LayerWeights::Empty,
            })
            .collect();
        Ok(NetworkWeights { layers })
    }

    /// Write `blob_path` and its manifest next to it (`.toml` extension).
    pub fn save(&self, cfg: &NetworkConfig, blob_path: &Path) -> Result<()> {
        let (blob, manifest) = self.to_blob(cfg);
        std::fs::write(blob_path, blob).map_err(|e| Error::io(blob_path, e))?;
        let mpath = manifest_path(blob_path);
        let text = toml::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))
    }

    pub fn load(cfg: &NetworkConfig, blob_path: &Path) -> Result<Self> {
        let blob = std::fs::read(blob_path).map_err(|e| Error::io(blob_path, e))?;
        let mpath = manifest_path(blob_path);
        let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: WeightManifest =
            toml::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", mpath.display())))?;
        Self::from_blob(cfg, &manifest, &blob)
    }
}

enum TensorRef<'a> {
    Matrix(&'a Array2<f64>),
    Vector(&'a Array1<f64>),
}

pub const BLOB_FORMAT: &str = "f64-le";

pub fn manifest_path(blob_path: &Path) -> PathBuf {
    blob_path.with_extension("toml")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightManifest {
    pub format: String,
    /// Number of f64 values in the blob.
    pub total: usize,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub layer: String,
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in f64 elements.
    pub offset: usize,
}
