//! Point cloud events: raw sensor frames, fixed-capacity compaction and the
//! inverse scatter back to sensor positions.

mod generate;
mod io;

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};

pub use generate::{generate_events, GeneratorConfig};
pub use io::{
    read_binary, read_events, read_text, write_binary, write_events, write_text, EventFile,
    EVENT_MAGIC, EVENT_VERSION,
};

/// Index value stored in unused slots of [`CompactEvent::y`].
pub const NO_SENSOR: u32 = u32::MAX;

/// Dense readout of every sensor for one event. A sensor is hit iff its row
/// is not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub features: Array2<f64>,
}

impl SensorFrame {
    pub fn new(features: Array2<f64>) -> Self {
        SensorFrame { features }
    }

    pub fn n_total(&self) -> usize {
        self.features.nrows()
    }

    pub fn f_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn hit_indices(&self) -> Vec<usize> {
        self.features
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|&v| v != 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Fixed-capacity point cloud: `n` live rows packed at the top of `x`, their
/// sensor positions in `y`, zero padding below.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactEvent {
    pub x: Array2<f64>,
    pub y: Vec<u32>,
    pub n: usize,
}

impl CompactEvent {
    pub fn empty(n_bar: usize, f_dim: usize) -> Self {
        CompactEvent {
            x: Array2::zeros((n_bar, f_dim)),
            y: vec![NO_SENSOR; n_bar],
            n: 0,
        }
    }

    pub fn n_bar(&self) -> usize {
        self.x.nrows()
    }

    pub fn f_dim(&self) -> usize {
        self.x.ncols()
    }

    /// Check the packing invariants against a sensor count.
    pub fn check(&self, n_total: usize) -> Result<()> {
        let n_bar = self.n_bar();
        if self.y.len() != n_bar {
            return Err(Error::data(format!(
                "index column has {} entries, capacity is {n_bar}",
                self.y.len()
            )));
        }
        if self.n > n_bar {
            return Err(Error::data(format!(
                "live count {} exceeds capacity {n_bar}",
                self.n
            )));
        }
        check_indices(&self.y[..self.n], n_total)?;
        if let Some(i) = self.y[self.n..].iter().position(|&s| s != NO_SENSOR) {
            return Err(Error::data(format!(
                "padding slot {} carries sensor index {}",
                self.n + i,
                self.y[self.n + i]
            )));
        }
        if let Some(r) = (self.n..n_bar).find(|&r| self.x.row(r).iter().any(|&v| v != 0.0)) {
            return Err(Error::data(format!("padding row {r} is not zero")));
        }
        Ok(())
    }
}

fn check_indices(y: &[u32], n_total: usize) -> Result<()> {
    for (i, &s) in y.iter().enumerate() {
        if s as usize >= n_total {
            return Err(Error::data(format!(
                "sensor index {s} at slot {i} out of range for {n_total} sensors"
            )));
        }
        if i > 0 && y[i - 1] >= s {
            return Err(Error::data(format!(
                "sensor indices not strictly increasing at slot {i} ({} then {s})",
                y[i - 1]
            )));
        }
    }
    Ok(())
}

/// Pack the hit rows of `frame` into an `n_bar`-row event. When there are
/// more hits than capacity the lowest sensor indices are kept.
pub fn compact(frame: &SensorFrame, n_bar: usize) -> Result<CompactEvent> {
    if n_bar == 0 {
        return Err(Error::config("event capacity must be at least 1"));
    }
    let mut event = CompactEvent::empty(n_bar, frame.f_dim());
    for (slot, sensor) in frame.hit_indices().into_iter().take(n_bar).enumerate() {
        event.x.row_mut(slot).assign(&frame.features.row(sensor));
        event.y[slot] = sensor as u32;
        event.n = slot + 1;
    }
    Ok(event)
}

/// Same as [`compact`] but checks the frame width first.
pub fn compact_checked(frame: &SensorFrame, n_bar: usize, f_dim: usize) -> Result<CompactEvent> {
    if frame.f_dim() != f_dim {
        return Err(Error::config(format!(
            "frame has {} features, expected {f_dim}",
            frame.f_dim()
        )));
    }
    compact(frame, n_bar)
}

/// Scatter the first `n` rows of `z` back to their sensor positions.
pub fn expand(z: ArrayView2<f64>, y: &[u32], n: usize, n_total: usize) -> Result<Array2<f64>> {
    if n > z.nrows() || n > y.len() {
        return Err(Error::data(format!(
            "live count {n} exceeds {} rows / {} indices",
            z.nrows(),
            y.len()
        )));
    }
    check_indices(&y[..n], n_total)?;
    let mut out = Array2::zeros((n_total, z.ncols()));
    for (i, &s) in y[..n].iter().enumerate() {
        out.row_mut(s as usize).assign(&z.row(i));
    }
    Ok(out)
}
