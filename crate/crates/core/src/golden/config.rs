//! Network description: ordered layers, numeric mode and thresholds.
//!
//! The config is plain TOML. Each `[[layers]]` entry has a `name`, a `kind`
//! (`dense`, `gravnet`, `condensation`) and kind-specific parameters. Unknown
//! kinds parse fine and are rejected later with an error naming the layer.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixnum::{ExpLutConfig, FixFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Real,
    Fixed8,
    Fixed16,
}

impl Precision {
    pub fn word_bits(&self) -> Option<u32> {
        match self {
            Precision::Real => None,
            Precision::Fixed8 => Some(8),
            Precision::Fixed16 => Some(16),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Precision::Real => "real",
            Precision::Fixed8 => "8 bit",
            Precision::Fixed16 => "16 bit",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Real => "real",
            Precision::Fixed8 => "fixed8",
            Precision::Fixed16 => "fixed16",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" | "float" | "f64" => Ok(Precision::Real),
            "fixed8" | "8" | "8bit" | "int8" => Ok(Precision::Fixed8),
            "fixed16" | "16" | "16bit" | "int16" => Ok(Precision::Fixed16),
            other => Err(Error::config(format!("unknown precision '{other}'"))),
        }
    }
}

/// Formats used by every layer in fixed-point mode, unless a layer overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedScheme {
    /// Activations (layer outputs and the network input).
    pub act: FixFormat,
    pub weight: FixFormat,
    /// Exponential edge weights in GravNet layers.
    pub exp: FixFormat,
    /// Condensation priority.
    pub beta: FixFormat,
}

impl FixedScheme {
    pub fn preset(word_bits: u32) -> Result<Self> {
        let (act, weight) = match word_bits {
            8 => (FixFormat::q8(), FixFormat::new(8, 6)?),
            16 => (FixFormat::q16(), FixFormat::new(16, 14)?),
            other => {
                return Err(Error::config(format!(
                    "no fixed-point preset for {other}-bit words"
                )))
            }
        };
        let unit = FixFormat::new(word_bits, word_bits - 1)?;
        Ok(FixedScheme {
            act,
            weight,
            exp: unit,
            beta: unit,
        })
    }

    fn check(&self) -> Result<()> {
        self.act.check()?;
        self.weight.check()?;
        self.exp.check()?;
        self.beta.check()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericMode {
    Real,
    Fixed(FixedScheme),
}

impl NumericMode {
    pub fn is_fixed(&self) -> bool {
        matches!(self, NumericMode::Fixed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Max,
    Sum,
    Mean,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Max => "max",
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionVariant {
    #[default]
    Isolation,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseSpec {
    pub out: usize,
    #[serde(default)]
    pub activation: Activation,
}

fn default_aggregations() -> Vec<Aggregation> {
    vec![Aggregation::Max, Aggregation::Sum]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravNetSpec {
    pub d_s: usize,
    pub d_f: usize,
    pub k: usize,
    #[serde(default = "default_aggregations")]
    pub aggregations: Vec<Aggregation>,
}

/// Condensation point selection on the head output: which column is the
/// priority logit and which columns span the clustering space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondensationParams {
    pub beta_index: usize,
    pub coord_start: usize,
    pub cluster_dims: usize,
    pub t_beta: f64,
    pub t_dist: f64,
    pub variant: SelectionVariant,
}

impl Default for CondensationParams {
    fn default() -> Self {
        CondensationParams {
            beta_index: 0,
            coord_start: 1,
            cluster_dims: 2,
            t_beta: 0.5,
            t_dist: 0.5,
            variant: SelectionVariant::Isolation,
        }
    }
}

impl CondensationParams {
    pub fn check(&self) -> Result<()> {
        if !(self.t_beta > 0.0 && self.t_beta < 1.0) {
            return Err(Error::config(format!(
                "t_beta {} must lie in (0, 1)",
                self.t_beta
            )));
        }
        if !(self.t_dist > 0.0 && self.t_dist.is_finite()) {
            return Err(Error::config(format!(
                "t_dist {} must be positive",
                self.t_dist
            )));
        }
        if self.cluster_dims == 0 {
            return Err(Error::config("cluster_dims must be positive"));
        }
        Ok(())
    }
}

/// Per-layer replacement of the scheme's activation or weight format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act: Option<FixFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<FixFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerOp {
    Dense(DenseSpec),
    GravNet(GravNetSpec),
    Condensation(CondensationParams),
    /// A kind this crate has no template for.
    Unsupported {
        kind: String,
        params: toml::Table,
    },
}

impl LayerOp {
    pub fn kind(&self) -> &str {
        match self {
            LayerOp::Dense(_) => "dense",
            LayerOp::GravNet(_) => "gravnet",
            LayerOp::Condensation(_) => "condensation",
            LayerOp::Unsupported { kind, .. } => kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer", into = "RawLayer")]
pub struct LayerDef {
    pub name: String,
    pub op: LayerOp,
    pub format: Option<FormatOverride>,
}

impl LayerDef {
    pub fn new(name: impl Into<String>, op: LayerOp) -> Self {
        LayerDef {
            name: name.into(),
            op,
            format: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<FormatOverride>,
    #[serde(flatten)]
    params: toml::Table,
}

impl TryFrom<RawLayer> for LayerDef {
    type Error = String;

    fn try_from(raw: RawLayer) -> std::result::Result<Self, String> {
        let params = toml::Value::Table(raw.params.clone());
        let ctx = |e: toml::de::Error| format!("layer '{}': {}", raw.name, e.message());
        let op = match raw.kind.as_str() {
            "dense" => LayerOp::Dense(params.try_into().map_err(ctx)?),
            "gravnet" => LayerOp::GravNet(params.try_into().map_err(ctx)?),
            "condensation" => LayerOp::Condensation(params.try_into().map_err(ctx)?),
            _ => LayerOp::Unsupported {
                kind: raw.kind.clone(),
                params: raw.params,
            },
        };
        Ok(LayerDef {
            name: raw.name,
            op,
            format: raw.format,
        })
    }
}

impl From<LayerDef> for RawLayer {
    fn from(def: LayerDef) -> Self {
        let kind = def.op.kind().to_string();
        let params = match def.op {
            LayerOp::Dense(s) => toml::Table::try_from(s),
            LayerOp::GravNet(s) => toml::Table::try_from(s),
            LayerOp::Condensation(s) => toml::Table::try_from(s),
            LayerOp::Unsupported { params, .. } => Ok(params),
        }
        .expect("layer parameters serialize to a table");
        RawLayer {
            name: def.name,
            kind,
            format: def.format,
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub precision: Precision,
    /// Replaces the precision preset's formats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<FixedScheme>,
    pub weight_seed: u64,
    pub weight_sparsity: f64,
    #[serde(default)]
    pub exp: ExpLutConfig,
    pub layers: Vec<LayerDef>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::reference()
    }
}

/// Shape of the tensor after a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub in_dim: usize,
    pub out_dim: usize,
}

impl NetworkConfig {
    /// The 5 -> 16 -> 32 -> GravNet(6, 8, k=8) -> 32 -> 9 -> condensation
    /// network with 40 % weight sparsity.
    pub fn reference() -> Self {
        let dense = |name: &str, out, activation| {
            LayerDef::new(name, LayerOp::Dense(DenseSpec { out, activation }))
        };
        NetworkConfig {
            input_dim: 5,
            precision: Precision::Fixed8,
            fixed: None,
            weight_seed: 7,
            weight_sparsity: 0.4,
            exp: ExpLutConfig::default(),
            layers: vec![
                dense("dense1", 16, Activation::Relu),
                dense("dense2", 32, Activation::Relu),
                LayerDef::new(
                    "gravnet",
                    LayerOp::GravNet(GravNetSpec {
                        d_s: 6,
                        d_f: 8,
                        k: 8,
                        aggregations: default_aggregations(),
                    }),
                ),
                dense("dense3", 32, Activation::Relu),
                dense("head", 9, Activation::None),
                LayerDef::new(
                    "condensation",
                    LayerOp::Condensation(CondensationParams::default()),
                ),
            ],
        }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self.fixed = None;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("network config serializes")
    }

    pub fn numeric_mode(&self) -> Result<NumericMode> {
        match (self.precision, self.fixed) {
            (Precision::Real, _) => Ok(NumericMode::Real),
            (_, Some(scheme)) => {
                scheme.check()?;
                Ok(NumericMode::Fixed(scheme))
            }
            (p, None) => Ok(NumericMode::Fixed(FixedScheme::preset(
                p.word_bits().expect("fixed precision"),
            )?)),
        }
    }

    /// The largest neighbour count any GravNet layer asks for.
    pub fn max_k(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| match &l.op {
                LayerOp::GravNet(g) => Some(g.k),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn condensation(&self) -> Option<&CondensationParams> {
        self.layers.iter().find_map(|l| match &l.op {
            LayerOp::Condensation(c) => Some(c),
            _ => None,
        })
    }

    /// Validate dimensions and parameters, returning the per-layer shapes.
    pub fn check(&self) -> Result<Vec<LayerShape>> {
        if let Some(l) = self
            .layers
            .iter()
            .find(|l| matches!(l.op, LayerOp::Unsupported { .. }))
        {
            return Err(Error::Mapping {
                layer: l.name.clone(),
                kind: l.op.kind().to_string(),
            });
        }
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be positive"));
        }
        if !(0.0..1.0).contains(&self.weight_sparsity) {
            return Err(Error::config(format!(
                "weight sparsity {} outside [0, 1)",
                self.weight_sparsity
            )));
        }
        self.exp.check()?;
        self.numeric_mode()?;

        let mut names = HashSet::new();
        let mut width = self.input_dim;
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            if !names.insert(layer.name.as_str()) {
                return Err(Error::config(format!(
                    "duplicate layer name '{}'",
                    layer.name
                )));
            }
            if let Some(fmt) = &layer.format {
                fmt.act.map(|f| f.check()).transpose()?;
                fmt.weight.map(|f| f.check()).transpose()?;
            }
            let ctx = |msg: String| Error::config(format!("layer '{}': {msg}", layer.name));
            let out = match &layer.op {
                LayerOp::Dense(d) => {
                    if d.out == 0 {
                        return Err(ctx("output width must be positive".into()));
                    }
                    d.out
                }
                LayerOp::GravNet(g) => {
                    if g.d_s == 0 || g.d_f == 0 || g.k == 0 {
                        return Err(ctx("d_s, d_f and k must be positive".into()));
                    }
                    if g.aggregations.is_empty() {
                        return Err(ctx("at least one aggregation required".into()));
                    }
                    let unique: HashSet<_> = g.aggregations.iter().collect();
                    if unique.len() != g.aggregations.len() {
                        return Err(ctx("aggregations must be distinct".into()));
                    }
                    g.aggregations.len() * g.d_f
                }
                LayerOp::Condensation(c) => {
                    c.check().map_err(|e| ctx(e.to_string()))?;
                    if i + 1 != self.layers.len() {
                        return Err(ctx("condensation must be the last layer".into()));
                    }
                    if c.beta_index >= width || c.coord_start + c.cluster_dims > width {
                        return Err(ctx(format!(
                            "beta/coordinate columns exceed input width {width}"
                        )));
                    }
                    width
                }
                LayerOp::Unsupported { .. } => unreachable!("rejected above"),
            };
            shapes.push(LayerShape {
                in_dim: width,
                out_dim: out,
            });
            width = out;
        }
        if self.condensation().is_none() {
            return Err(Error::config("network must end with a condensation layer"));
        }
        Ok(shapes)
    }

    /// Width of the head output that feeds the condensation layer.
    pub fn output_dim(&self) -> Result<usize> {
        Ok(self
            .check()?
            .last()
            .map(|s| s.out_dim)
            .unwrap_or(self.input_dim))
    }
}
