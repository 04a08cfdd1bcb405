//! The multi-path assessment model: per-path encoders and scorers, the path
//! dependency weighting, fusion into one score, and the training losses.

mod forward;
mod path;
mod trace;
mod train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{ParamBlock, ParamId, Rng, Tensor2D};

pub use forward::{aggregate, fuse, mse_loss, ForwardTrace, LossParts, PathTrace};
pub use path::{LearnedFns, PathId, PathSet, PathSpec};
pub use trace::write_trace_csv;
pub use train::{train, EpochLog, TrainConfig, TrainSample};

/// Per-path input features keyed by path.
pub type PathFeatures = BTreeMap<PathId, Tensor2D>;

/// Default contrastive neighborhood half-width.
pub const DEFAULT_HALF_WIDTH: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Active paths in canonical order.
    pub paths: Vec<PathSpec>,
    /// Whether predictors and the contrastive term are present.
    pub contrastive: bool,
    pub half_width: usize,
    /// Multiplier on the per-step contrastive term in the full loss.
    #[serde(default = "default_contrastive_weight")]
    pub contrastive_weight: f64,
}

fn default_contrastive_weight() -> f64 {
    1.0
}

impl ModelConfig {
    /// Default specs for every path in `active`, with input dims from `dims`.
    pub fn new(dims: &BTreeMap<PathId, usize>, active: &PathSet) -> Result<Self> {
        let paths = active
            .iter()
            .map(|id| {
                dims.get(&id)
                    .map(|&d| PathSpec::new(id, d))
                    .ok_or_else(|| Error::Config(format!("no input dimension for path {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            paths,
            contrastive: true,
            half_width: DEFAULT_HALF_WIDTH,
            contrastive_weight: default_contrastive_weight(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::Config("model needs at least one path".into()));
        }
        for pair in self.paths.windows(2) {
            if pair[0].id >= pair[1].id {
                return Err(Error::Config(
                    "paths must be distinct and in V,T,P,E order".into(),
                ));
            }
        }
        for p in &self.paths {
            p.validate()?;
        }
        if self.contrastive && self.half_width == 0 {
            return Err(Error::Config(
                "contrastive half-width must be at least 1".into(),
            ));
        }
        if !(self.contrastive_weight >= 0.0) || !self.contrastive_weight.is_finite() {
            return Err(Error::Config(
                "contrastive weight must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn path_set(&self) -> PathSet {
        PathSet::new(self.paths.iter().map(|p| p.id)).expect("validated non-empty")
    }

    pub fn spec(&self, id: PathId) -> Option<&PathSpec> {
        self.paths.iter().find(|p| p.id == id)
    }

    /// Channel count of the aggregated features.
    pub fn aggregate_dim(&self) -> usize {
        self.paths.iter().map(|p| p.input_dim).sum()
    }

    pub fn input_dims(&self) -> BTreeMap<PathId, usize> {
        self.paths.iter().map(|p| (p.id, p.input_dim)).collect()
    }

    fn has_predictor(&self, spec: &PathSpec) -> bool {
        self.contrastive && spec.learned.predictor
    }
}

/// Two-layer frame-wise perceptron: affine, relu, affine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// `(kernel, bias)` per conv layer.
    pub encoder: Vec<(ParamId, ParamId)>,
    pub scorer: Option<Mlp>,
    pub weigher: Option<Mlp>,
    pub predictor: Option<Mlp>,
}

/// All learnable parameters. The concatenation aggregator has none.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelParams {
    pub block: ParamBlock,
    pub paths: BTreeMap<PathId, PathParams>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Model {
    config: ModelConfig,
    params: ModelParams,
}

fn add_mlp(
    block: &mut ParamBlock,
    prefix: &str,
    din: usize,
    hidden: usize,
    dout: usize,
    rng: &mut Rng,
) -> Mlp {
    Mlp {
        w1: block.add_uniform(format!("{prefix}.w1"), din, hidden, din, rng),
        b1: block.add_uniform(format!("{prefix}.b1"), 1, hidden, din, rng),
        w2: block.add_uniform(format!("{prefix}.w2"), hidden, dout, hidden, rng),
        b2: block.add_uniform(format!("{prefix}.b2"), 1, dout, hidden, rng),
    }
}

impl Model {
    /// Fresh parameters drawn from the `init` stream of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::derive(seed, "model-init");
        let mut block = ParamBlock::new();
        let mut paths = BTreeMap::new();
        let agg_dim = config.aggregate_dim();
        for spec in &config.paths {
            let id = spec.id;
            let mut pp = PathParams::default();
            if spec.learned.encoder {
                let k = spec.kernel_size;
                for layer in 0..spec.encoder_layers {
                    let din = if layer == 0 {
                        spec.input_dim
                    } else {
                        spec.embed_dim
                    };
                    let fan_in = k * din;
                    let w = block.add_uniform(
                        format!("{id}.enc{layer}.w"),
                        fan_in,
                        spec.embed_dim,
                        fan_in,
                        &mut rng,
                    );
                    let b = block.add_uniform(
                        format!("{id}.enc{layer}.b"),
                        1,
                        spec.embed_dim,
                        fan_in,
                        &mut rng,
                    );
                    pp.encoder.push((w, b));
                }
            }
            if spec.learned.scorer {
                pp.scorer = Some(add_mlp(
                    &mut block,
                    &format!("{id}.score"),
                    spec.embed_dim,
                    spec.hidden,
                    1,
                    &mut rng,
                ));
            }
            if spec.learned.weigher {
                pp.weigher = Some(add_mlp(
                    &mut block,
                    &format!("{id}.weight"),
                    agg_dim,
                    spec.hidden,
                    1,
                    &mut rng,
                ));
            }
            if config.has_predictor(spec) {
                pp.predictor = Some(add_mlp(
                    &mut block,
                    &format!("{id}.predict"),
                    spec.embed_dim,
                    spec.hidden,
                    spec.embed_dim,
                    &mut rng,
                ));
            }
            paths.insert(id, pp);
        }
        Ok(Self {
            config,
            params: ModelParams { block, paths },
        })
    }

    /// A model over a subset of this model's paths, with fresh parameters.
    pub fn ablate(&self, active: &PathSet, seed: u64) -> Result<Self> {
        let paths = active
            .iter()
            .map(|id| {
                self.config
                    .spec(id)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("path {id} is not part of this model")))
            })
            .collect::<Result<Vec<_>>>()?;
        Model::new(
            ModelConfig {
                paths,
                ..self.config.clone()
            },
            seed,
        )
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn block(&self) -> &ParamBlock {
        &self.params.block
    }

    pub fn block_mut(&mut self) -> &mut ParamBlock {
        &mut self.params.block
    }

    pub(crate) fn path_params(&self, id: PathId) -> Result<&PathParams> {
        self.params
            .paths
            .get(&id)
            .ok_or_else(|| Error::Config(format!("path {id} is not part of this model")))
    }

    pub(crate) fn spec_of(&self, id: PathId) -> Result<&PathSpec> {
        self.config
            .spec(id)
            .ok_or_else(|| Error::Config(format!("path {id} is not part of this model")))
    }

    /// Checks that `features` holds a sequence of the right width for every
    /// active path and that all share one length.
    pub fn check_features(&self, features: &PathFeatures) -> Result<usize> {
        let mut len = None;
        for spec in &self.config.paths {
            let x = features
                .get(&spec.id)
                .ok_or_else(|| Error::Data(format!("missing features for path {}", spec.id)))?;
            if x.cols() != spec.input_dim {
                return Err(Error::Shape(format!(
                    "path {}: features have {} channels, model expects {}",
                    spec.id,
                    x.cols(),
                    spec.input_dim
                )));
            }
            if x.rows() == 0 {
                return Err(Error::Data(format!("path {}: empty sequence", spec.id)));
            }
            match len {
                None => len = Some(x.rows()),
                Some(l) if l != x.rows() => {
                    return Err(Error::Data(format!(
                        "path {}: length {} differs from {l}",
                        spec.id,
                        x.rows()
                    )))
                }
                _ => {}
            }
        }
        Ok(len.expect("non-empty model"))
    }
}
