//! Run configuration read from a TOML file.
//!
//! ```toml
//! seed = 0                 # drives generation, splits, initialization and run seeds
//!
//! [synth]                  # synthetic generator; every field optional, `seed` not allowed
//! n_trials = 60
//!
//! [data]
//! target_fps = 5.0         # optional decimation applied when loading sequences
//!
//! [model]
//! paths = "VTPE"
//! contrastive = true
//! half_width = 8
//! contrastive_weight = 1.0
//! encoder_layers = 2
//! kernel_size = 3
//! hidden = 16
//! dims = { V = 16 }        # optional; checked against the data before training
//! embed_dims = { T = 8 }   # optional overrides of 20/4/4 for V/T/E
//!
//! [train]
//! epochs = 40
//! accumulation = 8
//! lr = 1e-3
//! beta1 = 0.9
//! beta2 = 0.999
//! eps = 1e-8
//!
//! [eval]
//! scheme = "kfold:4"       # default for `splits` when --scheme is omitted
//! n_runs = 5
//! learner = "model"        # or "oracle" to sanity-check the pipeline
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skillpath_core::data::{SplitScheme, SynthConfig};
use skillpath_core::model::{
    ModelConfig, PathId, PathSet, PathSpec, TrainConfig, DEFAULT_HALF_WIDTH,
};
use skillpath_core::numcore::AdamConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub target_fps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub paths: PathSet,
    pub contrastive: bool,
    pub half_width: usize,
    pub contrastive_weight: f64,
    pub encoder_layers: usize,
    pub kernel_size: usize,
    pub hidden: usize,
    /// Expected input channels per path letter.
    pub dims: BTreeMap<String, usize>,
    pub embed_dims: BTreeMap<String, usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            paths: PathSet::all(),
            contrastive: true,
            half_width: DEFAULT_HALF_WIDTH,
            contrastive_weight: 1.0,
            encoder_layers: 2,
            kernel_size: 3,
            hidden: 16,
            dims: BTreeMap::new(),
            embed_dims: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub accumulation: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            accumulation: t.accumulation,
            lr: t.adam.lr,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            eps: t.adam.eps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Model,
    /// Predicts the true targets; only useful to check the evaluation plumbing.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub scheme: SplitScheme,
    pub n_runs: usize,
    pub learner: LearnerKind,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            scheme: SplitScheme::KFold(4),
            n_runs: 5,
            learner: LearnerKind::Model,
        }
    }
}

fn path_letter(key: &str) -> Result<PathId> {
    let mut chars = key.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(PathId::from_letter(c)?),
        _ => bail!("expected a single path letter, got {key:?}"),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text)?;
        if let Some(synth) = raw.get("synth").and_then(toml::Value::as_table) {
            if synth.contains_key("seed") {
                bail!("[synth] seed is not allowed; set the top-level seed instead");
            }
        }
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.synth_config().validate()?;
        for key in self.model.dims.keys().chain(self.model.embed_dims.keys()) {
            path_letter(key)?;
        }
        if self.train.accumulation == 0 {
            bail!("train.accumulation must be at least 1");
        }
        if !(self.train.lr > 0.0) {
            bail!("train.lr must be positive");
        }
        if self.eval.n_runs == 0 {
            bail!("eval.n_runs must be at least 1");
        }
        Ok(())
    }

    /// Hex SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            accumulation: t.accumulation,
            adam: AdamConfig {
                lr: t.lr,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.eps,
            },
            seed: self.seed,
        }
    }

    /// Model configuration for data with the given input widths.
    ///
    /// Fails before any training when the config pins a width that the data
    /// does not have.
    pub fn model_config(&self, data_dims: &BTreeMap<PathId, usize>) -> Result<ModelConfig> {
        let m = &self.model;
        for (key, &want) in &m.dims {
            let id = path_letter(key)?;
            match data_dims.get(&id) {
                Some(&have) if have != want => {
                    bail!("path {id}: config expects {want} input channels but the data has {have}")
                }
                None if m.paths.contains(id) => bail!("path {id}: missing from the data"),
                _ => {}
            }
        }
        let mut specs = Vec::new();
        for id in m.paths.iter() {
            let Some(&dim) = data_dims.get(&id) else {
                bail!("path {id} is active but missing from the data");
            };
            let mut spec = PathSpec::new(id, dim);
            spec.encoder_layers = m.encoder_layers;
            spec.kernel_size = m.kernel_size;
            spec.hidden = m.hidden;
            if let Some(&e) = m.embed_dims.get(&id.to_string()) {
                if id.is_proxy() {
                    bail!("the proxy path has a fixed embedding size");
                }
                spec.embed_dim = e;
            }
            specs.push(spec);
        }
        let cfg = ModelConfig {
            paths: specs,
            contrastive: m.contrastive,
            half_width: m.half_width,
            contrastive_weight: m.contrastive_weight,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
