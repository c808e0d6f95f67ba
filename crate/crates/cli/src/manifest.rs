//! Run manifest: which network, weights and events to use, on which
//! architecture.
//!
//! ```toml
//! events = "events.bin"
//! network = "network.toml"   # optional, default reference network
//! weights = "weights.bin"    # optional, default seeded initialisation
//! out_dir = "out"            # optional
//! seed = 7                   # optional weight seed override
//!
//! [arch]
//! n_bar = 32
//! par = 2
//! precision = "fixed8"
//! f_kernel = 290e6
//!
//! [sim]                      # optional
//! warmup_events = 2
//! max_cycles = 1000000000
//! record_trace = true
//!
//! [depths]                   # optional pipeline depth table overrides
//! exp = 2
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use pcnflow::dataflow::{ArchParams, DepthTable};
use pcnflow::events::{read_events, EventFile};
use pcnflow::golden::{Model, NetworkConfig, NetworkWeights, Precision};
use pcnflow::sim::SimConfig;
use pcnflow::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub n_bar: usize,
    pub par: usize,
    pub precision: Precision,
    pub f_kernel: f64,
}

impl ArchSpec {
    pub fn params(&self) -> ArchParams {
        ArchParams {
            n_bar: self.n_bar,
            par: self.par,
            f_kernel: self.f_kernel,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub warmup_events: Option<usize>,
    pub max_cycles: Option<u64>,
    pub record_trace: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub events: PathBuf,
    #[serde(default)]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub weights: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub arch: ArchSpec,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub depths: DepthTable,
}

/// A manifest with every referenced file loaded and checked.
pub struct Loaded {
    pub manifest: RunManifest,
    pub network: NetworkConfig,
    pub model: Model,
    pub events: EventFile,
    pub out_dir: Option<PathBuf>,
}

impl Loaded {
    pub fn sim_config(&self, functional: bool) -> SimConfig {
        let s = &self.manifest.sim;
        let d = SimConfig::default();
        SimConfig {
            warmup_events: s.warmup_events.unwrap_or(d.warmup_events),
            max_cycles: s.max_cycles.unwrap_or(d.max_cycles),
            record_trace: s.record_trace.unwrap_or(d.record_trace),
            functional,
            ..d
        }
    }

    /// Same network and weights in another numeric mode.
    pub fn model_in(&self, precision: Precision) -> pcnflow::Result<Model> {
        let cfg = self.network.clone().with_precision(precision);
        match &self.manifest.weights {
            Some(path) => Model::new(&cfg, &NetworkWeights::load(&cfg, path)?),
            None => Model::from_config(&cfg),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load(path: &Path) -> pcnflow::Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: RunManifest = toml::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {}", path.display(), e.message())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    m.events = resolve(base, &m.events);
    m.network = m.network.map(|p| resolve(base, &p));
    m.weights = m.weights.map(|p| resolve(base, &p));
    let out_dir = m.out_dir.as_ref().map(|p| resolve(base, p));

    m.arch.params().check()?;
    let mut network = match &m.network {
        Some(p) => NetworkConfig::load(p)?,
        None => NetworkConfig::reference(),
    };
    network = network.with_precision(m.arch.precision);
    if let Some(seed) = m.seed {
        network.weight_seed = seed;
    }
    let model = match &m.weights {
        Some(p) => Model::new(&network, &NetworkWeights::load(&network, p)?)?,
        None => Model::from_config(&network)?,
    };
    let events = read_events(&m.events)?;
    if events.n_bar != m.arch.n_bar {
        return Err(Error::config(format!(
            "{}: events have capacity {}, arch.n_bar is {}",
            m.events.display(),
            events.n_bar,
            m.arch.n_bar
        )));
    }
    if events.f_dim != network.input_dim {
        return Err(Error::data(format!(
            "{}: events have {} features, network expects {}",
            m.events.display(),
            events.f_dim,
            network.input_dim
        )));
    }
    Ok(Loaded {
        manifest: m,
        network,
        model,
        events,
        out_dir,
    })
}
