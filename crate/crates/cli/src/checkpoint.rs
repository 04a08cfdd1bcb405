//! Trained parameters plus the model configuration they belong to.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use skillpath_core::model::{Model, ModelConfig, PathId};
use skillpath_core::numcore::Tensor2D;

use crate::config::sha256_hex;

const FORMAT: &str = "skillpath-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub value: Tensor2D,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    /// Hash of `model`, which records every path's input width.
    pub config_hash: String,
    pub model: ModelConfig,
    pub target_fps: Option<f64>,
    pub seed: u64,
    pub adam_steps: u64,
    pub params: Vec<NamedParam>,
}

pub fn model_hash(cfg: &ModelConfig) -> String {
    sha256_hex(
        serde_json::to_string(cfg)
            .expect("model config serializes")
            .as_bytes(),
    )
}

impl Checkpoint {
    pub fn from_model(model: &Model, target_fps: Option<f64>, seed: u64) -> Self {
        let params = model
            .block()
            .iter()
            .map(|(_, p)| NamedParam {
                name: p.name.clone(),
                value: p.value.clone(),
            })
            .collect();
        Self {
            format: FORMAT.into(),
            config_hash: model_hash(model.config()),
            model: model.config().clone(),
            target_fps,
            seed,
            adam_steps: model.block().step(),
            params,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .with_context(|| format!("parsing checkpoint {}", path.display()))?;
        if ck.format != FORMAT {
            bail!(
                "{}: unsupported checkpoint format {:?}",
                path.display(),
                ck.format
            );
        }
        if ck.config_hash != model_hash(&ck.model) {
            bail!(
                "{}: config hash does not match the stored model config",
                path.display()
            );
        }
        Ok(ck)
    }

    /// Rebuilds the model; every parameter must be present with its shape.
    pub fn to_model(&self) -> Result<Model> {
        let mut model = Model::new(self.model.clone(), self.seed)?;
        let stored: BTreeMap<&str, &Tensor2D> = self
            .params
            .iter()
            .map(|p| (p.name.as_str(), &p.value))
            .collect();
        if stored.len() != model.block().len() {
            bail!(
                "checkpoint has {} parameters, model needs {}",
                stored.len(),
                model.block().len()
            );
        }
        let ids: Vec<_> = model
            .block()
            .iter()
            .map(|(id, p)| (id, p.name.clone()))
            .collect();
        for (id, name) in ids {
            let Some(value) = stored.get(name.as_str()) else {
                bail!("checkpoint is missing parameter {name}");
            };
            let slot = model.block_mut().get_mut(id);
            if slot.shape() != value.shape() {
                bail!(
                    "parameter {name}: shape {:?} but model needs {:?}",
                    value.shape(),
                    slot.shape()
                );
            }
            *slot = (*value).clone();
        }
        Ok(model)
    }

    /// Errors unless `data_dims` has the input width this model was trained on
    /// for every one of its paths.
    pub fn check_dims(&self, data_dims: &BTreeMap<PathId, usize>) -> Result<()> {
        for (id, want) in self.model.input_dims() {
            match data_dims.get(&id) {
                Some(&have) if have == want => {}
                Some(&have) => {
                    bail!("checkpoint expects {want} channels on path {id}, manifest has {have}")
                }
                None => bail!("checkpoint uses path {id}, which the manifest lacks"),
            }
        }
        Ok(())
    }
}
