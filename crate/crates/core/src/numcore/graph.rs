//! Tape-based reverse-mode differentiation over [`Tensor2D`] values.

use crate::error::{Error, Result};
use crate::numcore::{ops, Tensor2D};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    TemporalConv {
        x: Var,
        w: Var,
        b: Var,
        dilation: usize,
    },
    Affine {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    ShiftDown(Var),
    Mul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Sum(Var),
    Contrastive {
        pred: Var,
        target: Var,
        half_width: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor2D,
    op: Op,
    requires_grad: bool,
}

/// Records forward operations so a scalar result can be differentiated.
///
/// A graph is built per forward pass and dropped afterwards. Leaves created
/// with [`Graph::param`] receive gradients; [`Graph::constant`] leaves do not.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor2D>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor2D, op: Op, requires_grad: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn param(&mut self, value: Tensor2D) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor2D) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor2D {
        &self.nodes[v.0].value
    }

    /// Gradient of the last [`Graph::backward`] target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor2D> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn temporal_conv(&mut self, x: Var, w: Var, b: Var, dilation: usize) -> Result<Var> {
        let out = ops::temporal_conv(self.value(x), self.value(w), self.value(b), dilation)?;
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(out, Op::TemporalConv { x, w, b, dilation }, rg))
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let out = ops::affine(self.value(x), self.value(w), self.value(b))?;
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(out, Op::Affine { x, w, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::relu(self.value(x));
        let rg = self.needs(&[x]);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = ops::sigmoid(self.value(x));
        let rg = self.needs(&[x]);
        self.push(out, Op::Sigmoid(x), rg)
    }

    pub fn softmax_over_time(&mut self, x: Var) -> Result<Var> {
        let out = ops::softmax_over_time(self.value(x))?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::Softmax(x), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor2D> = parts.iter().map(|&p| self.value(p)).collect();
        let out = ops::concat_cols(&values)?;
        let rg = self.needs(parts);
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    pub fn shift_down(&mut self, x: Var) -> Var {
        let out = ops::shift_down(self.value(x));
        let rg = self.needs(&[x]);
        self.push(out, Op::ShiftDown(x), rg)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Shape(format!("{what}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = ops::zip_map(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = ops::zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = ops::zip_map(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = ops::map(self.value(a), |x| x * factor);
        let rg = self.needs(&[a]);
        self.push(out, Op::Scale(a, factor), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = ops::map(self.value(a), |x| x * x);
        let rg = self.needs(&[a]);
        self.push(out, Op::Square(a), rg)
    }

    /// Sum of all entries as a 1x1 tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor2D::scalar(self.value(a).sum());
        let rg = self.needs(&[a]);
        self.push(out, Op::Sum(a), rg)
    }

    /// Sums a list of 1x1 values; an empty list yields a zero constant.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let mut iter = terms.iter().copied();
        let Some(mut acc) = iter.next() else {
            return Ok(self.constant(Tensor2D::scalar(0.0)));
        };
        for t in iter {
            acc = self.add(acc, t)?;
        }
        Ok(acc)
    }

    pub fn contrastive_loss(&mut self, pred: Var, target: Var, half_width: usize) -> Result<Var> {
        let loss = ops::contrastive_loss(self.value(pred), self.value(target), half_width)?;
        let rg = self.needs(&[pred, target]);
        Ok(self.push(
            Tensor2D::scalar(loss),
            Op::Contrastive {
                pred,
                target,
                half_width,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`, filling gradients for every
    /// node that depends on a parameter leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::Usage(format!(
                "backward on a non-scalar {r}x{c} value"
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor2D::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else {
                continue;
            };
            let contributions = self.vjp(idx, &g);
            self.grads[idx] = Some(g);
            for (var, cg) in contributions {
                if !self.nodes[var.0].requires_grad {
                    continue;
                }
                match &mut self.grads[var.0] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(cg.data()) {
                            *a += b;
                        }
                    }
                    slot @ None => *slot = Some(cg),
                }
            }
        }
        Ok(())
    }

    fn vjp(&self, idx: usize, g: &Tensor2D) -> Vec<(Var, Tensor2D)> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::TemporalConv { x, w, b, dilation } => {
                let (gx, gw, gb) =
                    ops::temporal_conv_backward(self.value(*x), self.value(*w), *dilation, g);
                vec![(*x, gx), (*w, gw), (*b, gb)]
            }
            Op::Affine { x, w, b } => {
                let (gx, gw, gb) = ops::affine_backward(self.value(*x), self.value(*w), g);
                vec![(*x, gx), (*w, gw), (*b, gb)]
            }
            Op::Relu(x) => vec![(*x, ops::relu_backward(self.value(*x), g))],
            Op::Sigmoid(x) => vec![(*x, ops::sigmoid_backward(&node.value, g))],
            Op::Softmax(x) => vec![(*x, ops::softmax_over_time_backward(&node.value, g))],
            Op::Concat(parts) => {
                let mut at = 0;
                parts
                    .iter()
                    .map(|&p| {
                        let w = self.value(p).cols();
                        let slice = g.slice_cols(at, at + w).expect("concat layout");
                        at += w;
                        (p, slice)
                    })
                    .collect()
            }
            Op::ShiftDown(x) => vec![(*x, ops::shift_down_backward(g))],
            Op::Mul(a, b) => vec![
                (*a, ops::zip_map(g, self.value(*b), |u, v| u * v)),
                (*b, ops::zip_map(g, self.value(*a), |u, v| u * v)),
            ],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, ops::map(g, |v| -v))],
            Op::Scale(a, f) => vec![(*a, ops::map(g, |v| v * f))],
            Op::Square(a) => vec![(*a, ops::zip_map(g, self.value(*a), |u, v| 2.0 * u * v))],
            Op::Sum(a) => {
                let s = g.data()[0];
                let (r, c) = self.value(*a).shape();
                vec![(*a, Tensor2D::filled(r, c, s))]
            }
            Op::Contrastive {
                pred,
                target,
                half_width,
            } => {
                let (gp, gt) = ops::contrastive_loss_backward(
                    self.value(*pred),
                    self.value(*target),
                    *half_width,
                    g.data()[0],
                );
                vec![(*pred, gp), (*target, gt)]
            }
        }
    }
}
