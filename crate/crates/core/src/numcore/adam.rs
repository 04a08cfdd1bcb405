use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Rng, Tensor2D};

/// Index of a parameter inside a [`ParamBlock`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor2D,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Named parameters with Adam moment buffers and a shared step counter.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParamBlock {
    params: Vec<Param>,
    step: u64,
}

impl ParamBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2D) -> ParamId {
        let n = value.len();
        self.params.push(Param {
            name: name.into(),
            value,
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        ParamId(self.params.len() - 1)
    }

    /// Adds a `rows x cols` parameter drawn from `U(-a, a)`, `a = sqrt(1 / fan_in)`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut Rng,
    ) -> ParamId {
        let a = (1.0 / fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform_range(-a, a)).collect();
        self.add(name, Tensor2D::from_vec(rows, cols, data).expect("sized"))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn get(&self, id: ParamId) -> &Tensor2D {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor2D {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn accumulate_grad(&mut self, id: ParamId, grad: &[f64]) -> Result<()> {
        self.params[id.0].value.accumulate_grad(grad)
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            if let Some(g) = p.value.grad_mut() {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }

    /// Ensures every parameter has a gradient slot, filling absent ones with zeros.
    pub fn zero_missing_grads(&mut self) {
        for p in &mut self.params {
            if p.value.grad().is_none() {
                let n = p.value.len();
                p.value.set_grad(vec![0.0; n]).expect("sized");
            }
        }
    }

    pub fn clear_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.value.clear_grad());
    }

    /// One bias-corrected Adam update over every parameter; clears gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if let Some(p) = self.params.iter().find(|p| p.value.grad().is_none()) {
            return Err(Error::Usage(format!(
                "parameter {} has no gradient",
                p.name
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for p in &mut self.params {
            let g = p.value.take_grad().expect("checked above");
            for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                let gi = g[i];
                p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * gi;
                p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = p.m[i] / c1;
                let v_hat = p.v[i] / c2;
                *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }

    pub fn moments(&self, id: ParamId) -> (&[f64], &[f64]) {
        let p = &self.params[id.0];
        (&p.m, &p.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut block = ParamBlock::new();
        let id = block.add("w", Tensor2D::column(&[1.0, -2.0]));
        block.accumulate_grad(id, &[0.5, 0.5]).unwrap();
        block.adam_step(&AdamConfig::default()).unwrap();
        let before = block.get(id).clone();
        let m_before = block.moments(id).0.to_vec();

        block.accumulate_grad(id, &[0.0, 0.0]).unwrap();
        block.adam_step(&AdamConfig::default()).unwrap();
        let (m, _) = block.moments(id);
        for (a, b) in m.iter().zip(&m_before) {
            assert!((a - 0.9 * b).abs() < 1e-15);
        }
        // bias-corrected momentum keeps moving; from zero state nothing moves
        let mut fresh = ParamBlock::new();
        let fid = fresh.add("w", before.clone());
        fresh.accumulate_grad(fid, &[0.0, 0.0]).unwrap();
        fresh.adam_step(&AdamConfig::default()).unwrap();
        assert_eq!(fresh.get(fid).data(), before.data());
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..Default::default()
        };
        let mut block = ParamBlock::new();
        let id = block.add("w", Tensor2D::column(&[0.0, 0.0]));
        block.accumulate_grad(id, &[3.0, -0.2]).unwrap();
        block.adam_step(&cfg).unwrap();
        let w = block.get(id).data();
        assert!((w[0] + 0.01).abs() < 1e-9);
        assert!((w[1] - 0.01).abs() < 1e-9);
        assert_eq!(block.step(), 1);
        assert!(block.get(id).grad().is_none());
    }

    #[test]
    fn missing_gradient_is_usage_error() {
        let mut block = ParamBlock::new();
        block.add("w", Tensor2D::scalar(1.0));
        assert!(matches!(
            block.adam_step(&AdamConfig::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn converges_on_quadratic() {
        // scalar recurrence as oracle
        let cfg = AdamConfig {
            lr: 0.1,
            ..Default::default()
        };
        let (mut w, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=200 {
            let g = 2.0 * (w - 2.0);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((w - 2.0).abs() < 0.05);

        let mut block = ParamBlock::new();
        let id = block.add("w", Tensor2D::scalar(0.0));
        for _ in 0..200 {
            let x = block.get(id).data()[0];
            block.accumulate_grad(id, &[2.0 * (x - 2.0)]).unwrap();
            block.adam_step(&cfg).unwrap();
        }
        let got = block.get(id).data()[0];
        assert_eq!(got.to_bits(), w.to_bits());
        assert!((got - 2.0).abs() < 0.05);
    }
}
