use serde::{Deserialize, Serialize};

use super::{LossParts, Model, PathFeatures};
use crate::error::Result;
use crate::numcore::{AdamConfig, Rng};
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Trials whose gradients are summed before each Adam step.
    pub accumulation: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            accumulation: 8,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// One labelled trial as seen by the trainer.
#[derive(Clone, Copy, Debug)]
pub struct TrainSample<'a> {
    pub features: &'a PathFeatures,
    /// Normalized rating in `[0, 1]`.
    pub target: f64,
}

/// Mean losses over the training set for one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mse: f64,
    pub con: f64,
    pub full: f64,
}

impl EpochLog {
    fn from_parts(epoch: usize, parts: &[LossParts]) -> Self {
        let n = parts.len().max(1) as f64;
        Self {
            epoch,
            mse: parts.iter().map(|p| p.mse).sum::<f64>() / n,
            con: parts.iter().map(|p| p.con).sum::<f64>() / n,
            full: parts.iter().map(|p| p.full).sum::<f64>() / n,
        }
    }
}

/// Mini-batch Adam over `samples`.
///
/// Entry 0 of the log evaluates the initial parameters; entry `e` holds the
/// running means observed while training epoch `e`. Per-trial gradients in a
/// batch may be computed in parallel; they are summed in batch order.
pub fn train(
    model: &mut Model,
    samples: &[TrainSample<'_>],
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<Vec<EpochLog>> {
    let initial = exec
        .map(samples, |s| {
            model.full_loss(s.features, s.target).map(|(p, _)| p)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut log = vec![EpochLog::from_parts(0, &initial)];
    if samples.is_empty() {
        return Ok(log);
    }

    let mut rng = Rng::derive(cfg.seed, "train-order");
    let batch = cfg.accumulation.max(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut parts = Vec::with_capacity(samples.len());
        for chunk in order.chunks(batch) {
            let snapshot: &Model = model;
            let results = exec
                .map(chunk, |&i| {
                    snapshot.loss_and_grads(samples[i].features, samples[i].target)
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            for (p, grads) in &results {
                model.add_grads(grads)?;
                parts.push(*p);
            }
            let block = model.block_mut();
            block.scale_grads(1.0 / chunk.len() as f64);
            block.zero_missing_grads();
            block.adam_step(&cfg.adam)?;
        }
        let entry = EpochLog::from_parts(epoch, &parts);
        log::debug!(
            "epoch {epoch}: mse {:.5} con {:.5} full {:.5}",
            entry.mse,
            entry.con,
            entry.full
        );
        log.push(entry);
    }
    Ok(log)
}
