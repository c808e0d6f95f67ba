//! Software model of a streaming accelerator for graph-based point cloud
//! networks.
//!
//! - [`fixnum`]: saturating fixed-point arithmetic and the exponential table.
//! - [`events`]: point cloud compaction, synthetic events, event files.
//! - [`golden`]: the functional reference network.
//! - [`dataflow`]: actor graph IR, network mapper, validation, analytic timing.
//! - [`sim`]: cycle-level simulation of an actor graph.
//! - [`reference`]: published hardware measurements, for report context.

pub mod dataflow;
pub mod error;
pub mod events;
pub mod fixnum;
pub mod golden;
pub mod reference;
pub mod sim;

pub use error::{Error, Result};
