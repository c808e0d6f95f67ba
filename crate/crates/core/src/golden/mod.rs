//! Functional reference model: network description, weights, and the
//! operators in real or fixed-point arithmetic.

pub mod config;
pub mod kernels;
pub mod model;
pub mod ops;
mod result;
pub mod weights;

pub use config::{
    Activation, Aggregation, CondensationParams, DenseSpec, FixedScheme, FormatOverride,
    GravNetSpec, LayerDef, LayerOp, LayerShape, NetworkConfig, NumericMode, Precision,
    SelectionVariant,
};
pub use kernels::{Selection, NO_NEIGHBOR};
pub use model::{
    Arith, CondensationLayer, DenseLayer, DenseParams, EdgeWeighting, GravNetLayer, LayerFormats,
    Model, PreparedLayer,
};
pub use ops::{
    condense, dense_forward, gravnet_forward, isolation, knn_all, max_abs_deviation, run_network,
    run_network_trace, KnnResult,
};
pub use result::InferenceResult;
pub use weights::{prune_weights, NetworkWeights, WeightManifest};
