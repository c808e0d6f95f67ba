//! Synthetic calorimeter-like events.
//!
//! Sensors sit on a virtual 2-D grid. Each frame draws its hit fraction
//! uniformly from the configured range and places the hits as Gaussian
//! clusters around random centres.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SensorFrame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_total: usize,
    pub f_dim: usize,
    /// Inclusive range of the hit fraction per frame.
    pub sparsity_range: [f64; 2],
    /// Inclusive range of the cluster count per frame.
    pub clusters_per_event: [usize; 2],
    /// Gaussian spread of a cluster, in grid cells.
    pub cluster_spread: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_total: 320,
            f_dim: 5,
            sparsity_range: [0.05, 0.20],
            clusters_per_event: [1, 4],
            cluster_spread: 1.5,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<()> {
        let [lo, hi] = self.sparsity_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::config(format!(
                "sparsity range [{lo}, {hi}] must satisfy 0 < low <= high < 1"
            )));
        }
        if self.n_total == 0 || self.f_dim == 0 {
            return Err(Error::config("n_total and f_dim must be positive"));
        }
        let [cmin, cmax] = self.clusters_per_event;
        if cmin == 0 || cmin > cmax {
            return Err(Error::config(format!(
                "cluster count range [{cmin}, {cmax}] must satisfy 1 <= min <= max"
            )));
        }
        if !(self.cluster_spread.is_finite() && self.cluster_spread > 0.0) {
            return Err(Error::config("cluster_spread must be positive"));
        }
        let (min_hits, max_hits) = self.hit_bounds();
        if min_hits > max_hits || max_hits == 0 {
            return Err(Error::config(format!(
                "no integer hit count fits the sparsity range for {} sensors",
                self.n_total
            )));
        }
        Ok(())
    }

    /// Hit counts whose fraction lies inside the sparsity range.
    fn hit_bounds(&self) -> (usize, usize) {
        let n = self.n_total as f64;
        let min_hits = (self.sparsity_range[0] * n - 1e-9).ceil().max(1.0) as usize;
        let max_hits = (self.sparsity_range[1] * n + 1e-9).floor() as usize;
        (min_hits, max_hits)
    }
}

struct Grid {
    width: usize,
    height: usize,
    n_total: usize,
}

impl Grid {
    fn new(n_total: usize) -> Self {
        let width = (n_total as f64).sqrt().ceil() as usize;
        let height = n_total.div_ceil(width);
        Grid {
            width,
            height,
            n_total,
        }
    }

    fn index(&self, col: i64, row: i64) -> Option<usize> {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return None;
        }
        let idx = row as usize * self.width + col as usize;
        (idx < self.n_total).then_some(idx)
    }

    fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    fn normalized(&self, idx: usize) -> (f64, f64) {
        let (c, r) = self.coords(idx);
        let u = c as f64 / (self.width.max(2) - 1) as f64;
        let v = r as f64 / (self.height.max(2) - 1) as f64;
        (u, v)
    }
}

/// Generate `count` frames. Frame `i` only depends on `(seed, i)`.
pub fn generate_events(cfg: &GeneratorConfig, count: usize) -> Result<Vec<SensorFrame>> {
    cfg.check()?;
    let grid = Grid::new(cfg.n_total);
    Ok((0..count)
        .map(|i| generate_frame(cfg, &grid, i as u64))
        .collect())
}

fn generate_frame(cfg: &GeneratorConfig, grid: &Grid, index: u64) -> SensorFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);

    let (min_hits, max_hits) = cfg.hit_bounds();
    let fraction = rng.random_range(cfg.sparsity_range[0]..=cfg.sparsity_range[1]);
    let hits = ((fraction * cfg.n_total as f64).round() as usize).clamp(min_hits, max_hits);
    let n_clusters = rng.random_range(cfg.clusters_per_event[0]..=cfg.clusters_per_event[1]);

    let centres: Vec<usize> = (0..n_clusters)
        .map(|_| rng.random_range(0..cfg.n_total))
        .collect();
    let peaks: Vec<f64> = (0..n_clusters)
        .map(|_| rng.random_range(0.5..3.0))
        .collect();
    let offset = Normal::new(0.0, cfg.cluster_spread).expect("spread checked positive");
    let jitter = Normal::new(0.0, 0.1).expect("constant");

    let mut taken = vec![false; cfg.n_total];
    let mut features = Array2::zeros((cfg.n_total, cfg.f_dim));
    for h in 0..hits {
        let c = h % n_clusters;
        let (cc, cr) = grid.coords(centres[c]);
        let mut sensor = None;
        for _ in 0..32 {
            let col = (cc as f64 + offset.sample(&mut rng)).round() as i64;
            let row = (cr as f64 + offset.sample(&mut rng)).round() as i64;
            if let Some(idx) = grid.index(col, row).filter(|&i| !taken[i]) {
                sensor = Some(idx);
                break;
            }
        }
        let sensor = sensor.unwrap_or_else(|| {
            // cluster neighbourhood saturated: fall back to any free sensor
            let free = taken.iter().filter(|&&t| !t).count();
            let pick = rng.random_range(0..free);
            taken
                .iter()
                .enumerate()
                .filter(|(_, &t)| !t)
                .nth(pick)
                .map(|(i, _)| i)
                .expect("hit count below sensor count")
        });
        taken[sensor] = true;

        let (sc, sr) = grid.coords(sensor);
        let r2 = (sc as f64 - cc as f64).powi(2) + (sr as f64 - cr as f64).powi(2);
        let energy = 0.05 + peaks[c] * (-r2 / (2.0 * cfg.cluster_spread.powi(2))).exp();
        let (u, v) = grid.normalized(sensor);
        let base = [energy, u, v, jitter.sample(&mut rng), (1.0 + energy).ln()];
        for k in 0..cfg.f_dim {
            let value = if k < base.len() {
                base[k]
            } else {
                base[k % base.len()] * base[(k / base.len()) % base.len()]
            };
            // stored as f32 on disk
            features[[sensor, k]] = value as f32 as f64;
        }
    }
    SensorFrame::new(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_fraction_gives_exact_hits() {
        let cfg = GeneratorConfig {
            sparsity_range: [0.1, 0.1],
            n_total: 320,
            ..Default::default()
        };
        for frame in generate_events(&cfg, 50).unwrap() {
            assert_eq!(frame.hit_indices().len(), 32);
        }
    }

    #[test]
    fn same_seed_same_frames() {
        let cfg = GeneratorConfig::default();
        assert_eq!(
            generate_events(&cfg, 5).unwrap(),
            generate_events(&cfg, 5).unwrap()
        );
        let other = GeneratorConfig {
            seed: 2,
            ..cfg.clone()
        };
        assert_ne!(
            generate_events(&cfg, 5).unwrap(),
            generate_events(&other, 5).unwrap()
        );
    }

    #[test]
    fn frames_are_independent_of_count() {
        let cfg = GeneratorConfig::default();
        let a = generate_events(&cfg, 3).unwrap();
        let b = generate_events(&cfg, 7).unwrap();
        assert_eq!(a[..], b[..3]);
    }

    #[test]
    fn rejects_bad_ranges() {
        for range in [[0.0, 0.1], [0.2, 0.1], [0.1, 1.0]] {
            let cfg = GeneratorConfig {
                sparsity_range: range,
                ..Default::default()
            };
            assert!(cfg.check().is_err(), "{range:?}");
        }
    }

    #[test]
    fn wide_feature_vectors_are_filled() {
        let cfg = GeneratorConfig {
            f_dim: 9,
            ..Default::default()
        };
        let frame = &generate_events(&cfg, 1).unwrap()[0];
        let i = frame.hit_indices()[0];
        assert!(frame.features[[i, 0]] > 0.0);
        assert_eq!(frame.f_dim(), 9);
    }
}
