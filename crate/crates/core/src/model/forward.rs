use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Mlp, Model, PathFeatures, PathId, PathParams, PathSpec};
use crate::error::{Error, Result};
use crate::numcore::{ops, Graph, Tensor2D, Var};

/// Intermediates of one path for one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub embedding: Tensor2D,
    pub scores: Tensor2D,
    pub weights: Tensor2D,
    /// Predicted embeddings; row 0 is unused. Absent on fixed paths.
    pub prediction: Option<Tensor2D>,
}

impl PathTrace {
    /// `S_m[t] * W_m[t]` over time.
    pub fn weighted_scores(&self) -> Vec<f64> {
        self.scores
            .data()
            .iter()
            .zip(self.weights.data())
            .map(|(s, w)| s * w)
            .collect()
    }
}

/// Everything the forward pass computed for one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub paths: BTreeMap<PathId, PathTrace>,
    /// Fused skill score.
    pub q: f64,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.paths.values().next().map_or(0, |p| p.scores.rows())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Supervised, contrastive and combined loss for one trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub mse: f64,
    pub con: f64,
    pub full: f64,
}

/// Channel-wise concatenation in canonical path order.
pub fn aggregate(features: &BTreeMap<PathId, Tensor2D>) -> Result<Tensor2D> {
    let parts: Vec<&Tensor2D> = features.values().collect();
    ops::concat_cols(&parts)
}

/// `q = (1/|paths|) * sum_m sum_t S_m[t] * W_m[t]`.
pub fn fuse(
    scores: &BTreeMap<PathId, Tensor2D>,
    weights: &BTreeMap<PathId, Tensor2D>,
) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Config("cannot fuse an empty path set".into()));
    }
    if !scores.keys().eq(weights.keys()) {
        return Err(Error::Config("score and weight paths differ".into()));
    }
    let mut total = 0.0;
    for (id, s) in scores {
        let w = &weights[id];
        if s.shape() != w.shape() {
            return Err(Error::Shape(format!(
                "path {id}: scores {:?} vs weights {:?}",
                s.shape(),
                w.shape()
            )));
        }
        total += s
            .data()
            .iter()
            .zip(w.data())
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    Ok(total / scores.len() as f64)
}

/// `(y - q)^2`; `y` must already be normalized onto `[0, 1]`.
pub fn mse_loss(q: f64, y: f64) -> Result<f64> {
    check_target(y)?;
    Ok((y - q) * (y - q))
}

fn check_target(y: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Data(format!(
            "target {y} is outside [0, 1]; normalize the rating first"
        )));
    }
    Ok(())
}

/// A forward pass under construction: the graph plus one leaf per parameter.
pub(crate) struct Session<'m> {
    pub graph: Graph,
    model: &'m Model,
    leaves: Vec<Var>,
}

pub(crate) struct PathVars {
    pub embedding: Var,
    pub scores: Var,
    pub weights: Var,
    pub prediction: Option<Var>,
}

impl<'m> Session<'m> {
    pub fn new(model: &'m Model) -> Self {
        let mut graph = Graph::new();
        let leaves = model
            .block()
            .iter()
            .map(|(_, p)| graph.param(p.value.clone()))
            .collect();
        Self {
            graph,
            model,
            leaves,
        }
    }

    fn p(&self, id: crate::numcore::ParamId) -> Var {
        self.leaves[id.0]
    }

    fn mlp(&mut self, mlp: &Mlp, x: Var) -> Result<Var> {
        let h = self.graph.affine(x, self.p(mlp.w1), self.p(mlp.b1))?;
        let h = self.graph.relu(h);
        self.graph.affine(h, self.p(mlp.w2), self.p(mlp.b2))
    }

    pub fn encode(&mut self, spec: &PathSpec, pp: &PathParams, x: Var) -> Result<Var> {
        let cols = self.graph.value(x).cols();
        if cols != spec.input_dim {
            return Err(Error::Shape(format!(
                "path {}: input has {cols} channels, expected {}",
                spec.id, spec.input_dim
            )));
        }
        if !spec.learned.encoder {
            return Ok(x);
        }
        let mut h = x;
        for (layer, &(w, b)) in pp.encoder.iter().enumerate() {
            if layer > 0 {
                h = self.graph.relu(h);
            }
            h = self
                .graph
                .temporal_conv(h, self.p(w), self.p(b), 1 << layer)?;
        }
        Ok(h)
    }

    pub fn score(&mut self, spec: &PathSpec, pp: &PathParams, embedding: Var) -> Result<Var> {
        let cols = self.graph.value(embedding).cols();
        if cols != spec.embed_dim {
            return Err(Error::Shape(format!(
                "path {}: embedding has {cols} channels, expected {}",
                spec.id, spec.embed_dim
            )));
        }
        match &pp.scorer {
            None if spec.embed_dim != 1 => Err(Error::Config(format!(
                "path {}: identity scorer needs one channel, embedding has {}",
                spec.id, spec.embed_dim
            ))),
            None => Ok(embedding),
            Some(mlp) => {
                let raw = self.mlp(mlp, embedding)?;
                Ok(self.graph.sigmoid(raw))
            }
        }
    }

    pub fn weights(&mut self, spec: &PathSpec, pp: &PathParams, aggregated: Var) -> Result<Var> {
        let (len, cols) = self.graph.value(aggregated).shape();
        let expect = self.model.config().aggregate_dim();
        if cols != expect {
            return Err(Error::Shape(format!(
                "path {}: aggregated features have {cols} channels, expected {expect}",
                spec.id
            )));
        }
        match &pp.weigher {
            None => Ok(self
                .graph
                .constant(Tensor2D::filled(len, 1, 1.0 / len as f64))),
            Some(mlp) => {
                let logits = self.mlp(mlp, aggregated)?;
                self.graph.softmax_over_time(logits)
            }
        }
    }

    pub fn predict(&mut self, spec: &PathSpec, pp: &PathParams, embedding: Var) -> Result<Var> {
        let mlp = pp
            .predictor
            .as_ref()
            .ok_or_else(|| Error::Config(format!("path {} has no predicting function", spec.id)))?;
        let next = self.mlp(mlp, embedding)?;
        Ok(self.graph.shift_down(next))
    }

    /// Full forward over every active path. Returns per-path vars and `q`.
    pub fn forward(
        &mut self,
        features: &PathFeatures,
    ) -> Result<(BTreeMap<PathId, PathVars>, Var)> {
        let model = self.model;
        model.check_features(features)?;
        let inputs: Vec<(PathId, Var)> = model
            .config()
            .paths
            .iter()
            .map(|s| (s.id, self.graph.constant(features[&s.id].clone())))
            .collect();
        let input_vars: Vec<Var> = inputs.iter().map(|&(_, v)| v).collect();
        let aggregated = self.graph.concat_cols(&input_vars)?;

        let mut out = BTreeMap::new();
        let mut contributions = Vec::new();
        for (spec, &(id, x)) in model.config().paths.iter().zip(&inputs) {
            let pp = model.path_params(id)?;
            let embedding = self.encode(spec, pp, x)?;
            let scores = self.score(spec, pp, embedding)?;
            let weights = self.weights(spec, pp, aggregated)?;
            let prediction = if pp.predictor.is_some() {
                Some(self.predict(spec, pp, embedding)?)
            } else {
                None
            };
            let weighted = self.graph.mul(scores, weights)?;
            contributions.push(self.graph.sum(weighted));
            out.insert(
                id,
                PathVars {
                    embedding,
                    scores,
                    weights,
                    prediction,
                },
            );
        }
        let total = self.graph.add_all(&contributions)?;
        let q = self.graph.scale(total, 1.0 / contributions.len() as f64);
        Ok((out, q))
    }

    /// `L_full = L_mse + sum_m L_con,m / (L - 1)`; returns `(full, mse, con)` vars.
    pub fn full_loss(
        &mut self,
        vars: &BTreeMap<PathId, PathVars>,
        q: Var,
        y: f64,
    ) -> Result<(Var, Var, Var)> {
        check_target(y)?;
        let target = self.graph.constant(Tensor2D::scalar(y));
        let diff = self.graph.sub(q, target)?;
        let mse = self.graph.square(diff);

        let half_width = self.model.config().half_width;
        let weight = self.model.config().contrastive_weight;
        let mut terms = Vec::new();
        for pv in vars.values() {
            let Some(pred) = pv.prediction else { continue };
            let len = self.graph.value(pv.embedding).rows();
            if len < 2 {
                continue;
            }
            let con = self
                .graph
                .contrastive_loss(pred, pv.embedding, half_width)?;
            terms.push(self.graph.scale(con, weight / (len - 1) as f64));
        }
        let con = self.graph.add_all(&terms)?;
        let full = self.graph.add(mse, con)?;
        Ok((full, mse, con))
    }

    pub fn trace(&self, vars: &BTreeMap<PathId, PathVars>, q: Var) -> ForwardTrace {
        let g = &self.graph;
        ForwardTrace {
            paths: vars
                .iter()
                .map(|(&id, pv)| {
                    (
                        id,
                        PathTrace {
                            embedding: g.value(pv.embedding).clone(),
                            scores: g.value(pv.scores).clone(),
                            weights: g.value(pv.weights).clone(),
                            prediction: pv.prediction.map(|p| g.value(p).clone()),
                        },
                    )
                })
                .collect(),
            q: g.value(q).data()[0],
        }
    }

    /// Gradient of the last backward target per parameter, in block order.
    pub fn param_grads(&self) -> Vec<Option<Vec<f64>>> {
        self.leaves
            .iter()
            .map(|&v| self.graph.grad(v).map(|g| g.data().to_vec()))
            .collect()
    }
}

fn single_path(
    model: &Model,
    id: PathId,
    input: &Tensor2D,
    f: impl FnOnce(&mut Session, &PathSpec, &PathParams, Var) -> Result<Var>,
) -> Result<Tensor2D> {
    let spec = model.spec_of(id)?;
    let pp = model.path_params(id)?;
    let mut s = Session::new(model);
    let x = s.graph.constant(input.clone());
    let out = f(&mut s, spec, pp, x)?;
    Ok(s.graph.value(out).clone())
}

impl Model {
    /// Embedding sequence of one path.
    pub fn encode_path(&self, id: PathId, x: &Tensor2D) -> Result<Tensor2D> {
        single_path(self, id, x, |s, spec, pp, x| s.encode(spec, pp, x))
    }

    /// Per-step score sequence of one path from its embedding.
    pub fn score_path(&self, id: PathId, embedding: &Tensor2D) -> Result<Tensor2D> {
        single_path(self, id, embedding, |s, spec, pp, e| s.score(spec, pp, e))
    }

    /// Temporal importance weights of one path from aggregated features.
    pub fn compute_weights(&self, id: PathId, aggregated: &Tensor2D) -> Result<Tensor2D> {
        single_path(self, id, aggregated, |s, spec, pp, a| {
            s.weights(spec, pp, a)
        })
    }

    /// Forecast embeddings: row `i` predicts embedding `i` from `i - 1`.
    pub fn predict_future(&self, id: PathId, embedding: &Tensor2D) -> Result<Tensor2D> {
        single_path(self, id, embedding, |s, spec, pp, e| s.predict(spec, pp, e))
    }

    pub fn forward(&self, features: &PathFeatures) -> Result<ForwardTrace> {
        let mut s = Session::new(self);
        let (vars, q) = s.forward(features)?;
        Ok(s.trace(&vars, q))
    }

    /// Training objective for one trial with normalized target `y`.
    pub fn full_loss(&self, features: &PathFeatures, y: f64) -> Result<(LossParts, ForwardTrace)> {
        let mut s = Session::new(self);
        let (vars, q) = s.forward(features)?;
        let (full, mse, con) = s.full_loss(&vars, q, y)?;
        let g = &s.graph;
        let parts = LossParts {
            mse: g.value(mse).data()[0],
            con: g.value(con).data()[0],
            full: g.value(full).data()[0],
        };
        Ok((parts, s.trace(&vars, q)))
    }

    /// Loss and per-parameter gradients for one trial, without touching the model.
    pub fn loss_and_grads(
        &self,
        features: &PathFeatures,
        y: f64,
    ) -> Result<(LossParts, Vec<Option<Vec<f64>>>)> {
        let mut s = Session::new(self);
        let (vars, q) = s.forward(features)?;
        let (full, mse, con) = s.full_loss(&vars, q, y)?;
        s.graph.backward(full)?;
        let g = &s.graph;
        let parts = LossParts {
            mse: g.value(mse).data()[0],
            con: g.value(con).data()[0],
            full: g.value(full).data()[0],
        };
        Ok((parts, s.param_grads()))
    }

    /// Backward on `L_full`, adding gradients into the parameter block.
    pub fn backward(&mut self, features: &PathFeatures, y: f64) -> Result<LossParts> {
        let (parts, grads) = self.loss_and_grads(features, y)?;
        self.add_grads(&grads)?;
        Ok(parts)
    }

    pub fn add_grads(&mut self, grads: &[Option<Vec<f64>>]) -> Result<()> {
        let ids: Vec<_> = self.block().iter().map(|(id, _)| id).collect();
        for (id, g) in ids.into_iter().zip(grads) {
            if let Some(g) = g {
                self.block_mut().accumulate_grad(id, g)?;
            }
        }
        Ok(())
    }
}
