//! A network ready to execute: weights quantized to their formats and every
//! layer tagged with the arithmetic it runs in.

use ndarray::{Array1, Array2, ArrayView2};

use super::config::{
    Activation, Aggregation, CondensationParams, LayerOp, NetworkConfig, NumericMode,
};
use super::weights::{DenseWeights, LayerWeights, NetworkWeights};
use crate::error::{Error, Result};
use crate::fixnum::{ExpLut, FixFormat};

/// Formats seen by one fixed-point layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerFormats {
    pub input: FixFormat,
    pub act: FixFormat,
    pub weight: FixFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arith {
    Real,
    Fixed(LayerFormats),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `in x out`, already on the weight grid in fixed mode.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseParams {
    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub params: DenseParams,
    pub arith: Arith,
}

impl DenseLayer {
    pub fn real(params: DenseParams) -> Self {
        DenseLayer {
            params,
            arith: Arith::Real,
        }
    }

    /// Quantize weights and bias into `formats`.
    pub fn fixed(params: DenseParams, formats: LayerFormats) -> Self {
        let weights = params.weights.mapv(|w| formats.weight.round_value(w));
        let bias = params.bias.mapv(|b| formats.act.round_value(b));
        DenseLayer {
            params: DenseParams {
                weights,
                bias,
                ..params
            },
            arith: Arith::Fixed(formats),
        }
    }

    fn build(w: &DenseWeights, activation: Activation, arith: Arith) -> Self {
        let params = DenseParams {
            weights: w.weight.clone(),
            bias: w.bias.clone(),
            activation,
        };
        match arith {
            Arith::Real => DenseLayer::real(params),
            Arith::Fixed(f) => DenseLayer::fixed(params, f),
        }
    }

    pub fn out_format(&self) -> Option<FixFormat> {
        match self.arith {
            Arith::Real => None,
            Arith::Fixed(f) => Some(f.act),
        }
    }
}

/// How edge weights `exp(-alpha * d2)` are evaluated.
#[derive(Debug, Clone)]
pub enum EdgeWeighting {
    Exact { alpha: f64 },
    Table(ExpLut),
}

#[derive(Debug, Clone)]
pub struct GravNetLayer {
    /// Learned clustering-space transform (`in -> d_s`, linear).
    pub coords: DenseLayer,
    /// Learned feature transform (`in -> d_f`, linear).
    pub features: DenseLayer,
    pub k: usize,
    pub aggregations: Vec<Aggregation>,
    pub weighting: EdgeWeighting,
    /// Output format of the reductions in fixed mode.
    pub out_format: Option<FixFormat>,
}

impl GravNetLayer {
    pub fn d_s(&self) -> usize {
        self.coords.params.out_dim()
    }

    pub fn d_f(&self) -> usize {
        self.features.params.out_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.aggregations.len() * self.d_f()
    }

    /// Fraction bits of an edge-weight times feature product (fixed mode).
    pub fn message_frac(&self) -> Option<u32> {
        match (&self.weighting, self.features.out_format()) {
            (EdgeWeighting::Table(lut), Some(f)) => Some(lut.out_format().frac_bits + f.frac_bits),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensationLayer {
    pub params: CondensationParams,
    /// Width of the incoming head output.
    pub in_dim: usize,
    pub beta_format: Option<FixFormat>,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum PreparedLayer {
    Dense(DenseLayer),
    GravNet(GravNetLayer),
    Condensation(CondensationLayer),
}

#[derive(Debug, Clone)]
pub struct Model {
    config: NetworkConfig,
    mode: NumericMode,
    input_format: Option<FixFormat>,
    layers: Vec<PreparedLayer>,
}

impl Model {
    pub fn new(config: &NetworkConfig, weights: &NetworkWeights) -> Result<Self> {
        let shapes = config.check()?;
        if weights.layers.len() != config.layers.len() {
            return Err(Error::data(format!(
                "weights cover {} layers, network has {}",
                weights.layers.len(),
                config.layers.len()
            )));
        }
        let mode = config.numeric_mode()?;
        let input_format = match mode {
            NumericMode::Real => None,
            NumericMode::Fixed(s) => Some(s.act),
        };
        let mut prev = input_format;
        let mut layers = Vec::with_capacity(config.layers.len());
        for ((def, shape), lw) in config.layers.iter().zip(&shapes).zip(&weights.layers) {
            let arith = match (mode, prev) {
                (NumericMode::Fixed(s), Some(input)) => {
                    let ov = def.format.unwrap_or_default();
                    Arith::Fixed(LayerFormats {
                        input,
                        act: ov.act.unwrap_or(s.act),
                        weight: ov.weight.unwrap_or(s.weight),
                    })
                }
                _ => Arith::Real,
            };
            let mismatch = || {
                Error::data(format!(
                    "weights for layer '{}' do not match its kind",
                    def.name
                ))
            };
            let check_shape = |w: &DenseWeights, out: usize| {
                if w.weight.shape() != [shape.in_dim, out] || w.bias.len() != out {
                    Err(Error::data(format!(
                        "layer '{}' expects {}x{} weights, got {:?}",
                        def.name,
                        shape.in_dim,
                        out,
                        w.weight.shape()
                    )))
                } else {
                    Ok(())
                }
            };
            let layer = match (&def.op, lw) {
                (LayerOp::Dense(d), LayerWeights::Dense(w)) => {
                    check_shape(w, d.out)?;
                    PreparedLayer::Dense(DenseLayer::build(w, d.activation, arith))
                }
                (LayerOp::GravNet(g), LayerWeights::GravNet { coords, features }) => {
                    check_shape(coords, g.d_s)?;
                    check_shape(features, g.d_f)?;
                    let weighting = match mode {
                        NumericMode::Real => EdgeWeighting::Exact {
                            alpha: config.exp.alpha,
                        },
                        NumericMode::Fixed(s) => {
                            EdgeWeighting::Table(ExpLut::new(config.exp, s.exp)?)
                        }
                    };
                    PreparedLayer::GravNet(GravNetLayer {
                        coords: DenseLayer::build(coords, Activation::None, arith),
                        features: DenseLayer::build(features, Activation::None, arith),
                        k: g.k,
                        aggregations: g.aggregations.clone(),
                        weighting,
                        out_format: match arith {
                            Arith::Fixed(f) => Some(f.act),
                            Arith::Real => None,
                        },
                    })
                }
                (LayerOp::Condensation(c), _) => PreparedLayer::Condensation(CondensationLayer {
                    params: *c,
                    in_dim: shape.in_dim,
                    beta_format: match mode {
                        NumericMode::Fixed(s) => Some(s.beta),
                        NumericMode::Real => None,
                    },
                }),
                _ => return Err(mismatch()),
            };
            prev = match &layer {
                PreparedLayer::Dense(d) => d.out_format(),
                PreparedLayer::GravNet(g) => g.out_format,
                PreparedLayer::Condensation(_) => prev,
            };
            layers.push(layer);
        }
        Ok(Model {
            config: config.clone(),
            mode,
            input_format,
            layers,
        })
    }

    /// Build with freshly initialised weights from the config's seed.
    pub fn from_config(config: &NetworkConfig) -> Result<Self> {
        Self::new(config, &NetworkWeights::init(config)?)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mode(&self) -> NumericMode {
        self.mode
    }

    pub fn layers(&self) -> &[PreparedLayer] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> Option<&PreparedLayer> {
        self.layers.get(index)
    }

    pub fn input_format(&self) -> Option<FixFormat> {
        self.input_format
    }

    pub fn condensation(&self) -> &CondensationLayer {
        match self.layers.last() {
            Some(PreparedLayer::Condensation(c)) => c,
            _ => unreachable!("config check guarantees a trailing condensation layer"),
        }
    }

    /// Quantize raw input features onto the input grid (identity in real mode).
    pub fn prepare_row(&self, row: &[f64]) -> Vec<f64> {
        match self.input_format {
            Some(f) => row.iter().map(|&v| f.round_value(v)).collect(),
            None => row.to_vec(),
        }
    }

    pub fn prepare_input(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match self.input_format {
            Some(f) => x.mapv(|v| f.round_value(v)),
            None => x.to_owned(),
        }
    }
}
