//! Forward kernels and their vector-Jacobian products.
//!
//! Every forward op here is a pure function of its inputs. The matching
//! `*_backward` function takes the upstream gradient and returns gradients
//! for each differentiable input. [`crate::numcore::Graph`] wires them together.

use crate::error::{Error, Result};
use crate::numcore::Tensor2D;

fn conv_kernel_size(x: &Tensor2D, weights: &Tensor2D) -> Result<usize> {
    let din = x.cols();
    if din == 0 || weights.rows() % din != 0 {
        return Err(Error::Shape(format!(
            "kernel with {} rows does not stack over {din} input channels",
            weights.rows()
        )));
    }
    let k = weights.rows() / din;
    if k % 2 == 0 {
        return Err(Error::Shape(format!("kernel size {k} must be odd")));
    }
    Ok(k)
}

fn check_bias(bias: &Tensor2D, dout: usize) -> Result<()> {
    if bias.shape() != (1, dout) {
        return Err(Error::Shape(format!(
            "bias is {}x{}, expected 1x{dout}",
            bias.rows(),
            bias.cols()
        )));
    }
    Ok(())
}

/// Dilated 1-D convolution over time with symmetric zero padding.
///
/// `weights` stacks the kernel taps: row `k * din + c` holds the output
/// weights for tap `k` and input channel `c`, so the tensor is
/// `(K * din) x dout`. Output length equals input length.
pub fn temporal_conv(
    x: &Tensor2D,
    weights: &Tensor2D,
    bias: &Tensor2D,
    dilation: usize,
) -> Result<Tensor2D> {
    if dilation == 0 {
        return Err(Error::Shape("dilation must be positive".into()));
    }
    let k = conv_kernel_size(x, weights)?;
    let (len, din) = x.shape();
    let dout = weights.cols();
    check_bias(bias, dout)?;
    let pad = (k - 1) / 2 * dilation;

    let mut out = Tensor2D::zeros(len, dout);
    for t in 0..len {
        let row = out.row_mut(t);
        row.copy_from_slice(bias.data());
        for tap in 0..k {
            let Some(src) = (t + tap * dilation).checked_sub(pad) else {
                continue;
            };
            if src >= len {
                continue;
            }
            let xs = x.row(src);
            for (c, &xv) in xs.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let w = weights.row(tap * din + c);
                for (o, wv) in row.iter_mut().zip(w) {
                    *o += xv * wv;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`temporal_conv`] with respect to `(x, weights, bias)`.
pub fn temporal_conv_backward(
    x: &Tensor2D,
    weights: &Tensor2D,
    dilation: usize,
    grad_out: &Tensor2D,
) -> (Tensor2D, Tensor2D, Tensor2D) {
    let (len, din) = x.shape();
    let dout = weights.cols();
    let k = weights.rows() / din;
    let pad = (k - 1) / 2 * dilation;

    let mut gx = x.same_shape_zeros();
    let mut gw = weights.same_shape_zeros();
    let mut gb = Tensor2D::zeros(1, dout);
    for t in 0..len {
        let g = grad_out.row(t);
        for (b, gv) in gb.data_mut().iter_mut().zip(g) {
            *b += gv;
        }
        for tap in 0..k {
            let Some(src) = (t + tap * dilation).checked_sub(pad) else {
                continue;
            };
            if src >= len {
                continue;
            }
            for c in 0..din {
                let xv = x.get(src, c);
                let wrow = tap * din + c;
                let mut acc = 0.0;
                {
                    let w = weights.row(wrow);
                    for (wv, gv) in w.iter().zip(g) {
                        acc += wv * gv;
                    }
                }
                gx.data_mut()[src * din + c] += acc;
                for (gwv, gv) in gw.row_mut(wrow).iter_mut().zip(g) {
                    *gwv += xv * gv;
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Row-wise `x * w + b`.
pub fn affine(x: &Tensor2D, w: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    if x.cols() != w.rows() {
        return Err(Error::Shape(format!(
            "affine: input has {} channels, weight expects {}",
            x.cols(),
            w.rows()
        )));
    }
    check_bias(b, w.cols())?;
    let dout = w.cols();
    let mut out = Tensor2D::zeros(x.rows(), dout);
    for t in 0..x.rows() {
        let row = out.row_mut(t);
        row.copy_from_slice(b.data());
        for (c, &xv) in x.row(t).iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            for (o, wv) in row.iter_mut().zip(w.row(c)) {
                *o += xv * wv;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`affine`] with respect to `(x, w, b)`.
pub fn affine_backward(
    x: &Tensor2D,
    w: &Tensor2D,
    grad_out: &Tensor2D,
) -> (Tensor2D, Tensor2D, Tensor2D) {
    let mut gx = x.same_shape_zeros();
    let mut gw = w.same_shape_zeros();
    let mut gb = Tensor2D::zeros(1, w.cols());
    for t in 0..x.rows() {
        let g = grad_out.row(t);
        for (b, gv) in gb.data_mut().iter_mut().zip(g) {
            *b += gv;
        }
        for (c, &xv) in x.row(t).iter().enumerate() {
            let mut acc = 0.0;
            for (wv, gv) in w.row(c).iter().zip(g) {
                acc += wv * gv;
            }
            gx.data_mut()[t * x.cols() + c] = acc;
            for (gwv, gv) in gw.row_mut(c).iter_mut().zip(g) {
                *gwv += xv * gv;
            }
        }
    }
    (gx, gw, gb)
}

pub fn relu(x: &Tensor2D) -> Tensor2D {
    map(x, |v| v.max(0.0))
}

/// Subgradient at zero is zero.
pub fn relu_backward(x: &Tensor2D, grad_out: &Tensor2D) -> Tensor2D {
    zip_map(x, grad_out, |v, g| if v > 0.0 { g } else { 0.0 })
}

/// Logistic map onto (0, 1).
pub fn sigmoid(x: &Tensor2D) -> Tensor2D {
    map(x, |v| {
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    })
}

pub fn sigmoid_backward(y: &Tensor2D, grad_out: &Tensor2D) -> Tensor2D {
    zip_map(y, grad_out, |s, g| g * s * (1.0 - s))
}

/// Softmax across the time axis of a single-channel sequence.
pub fn softmax_over_time(x: &Tensor2D) -> Result<Tensor2D> {
    if x.cols() != 1 {
        return Err(Error::Shape(format!(
            "softmax over time expects one channel, got {}",
            x.cols()
        )));
    }
    let max = x.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = map(x, |v| (v - max).exp());
    let z: f64 = out.data().iter().sum();
    out.data_mut().iter_mut().for_each(|v| *v /= z);
    Ok(out)
}

pub fn softmax_over_time_backward(y: &Tensor2D, grad_out: &Tensor2D) -> Tensor2D {
    let dot: f64 = y
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(a, b)| a * b)
        .sum();
    zip_map(y, grad_out, |s, g| s * (g - dot))
}

/// Channel-wise concatenation of sequences that share a length.
pub fn concat_cols(parts: &[&Tensor2D]) -> Result<Tensor2D> {
    let Some(first) = parts.first() else {
        return Err(Error::Shape("nothing to concatenate".into()));
    };
    let len = first.rows();
    if let Some(bad) = parts.iter().find(|p| p.rows() != len) {
        return Err(Error::Data(format!(
            "sequence lengths differ: {len} vs {}",
            bad.rows()
        )));
    }
    let width: usize = parts.iter().map(|p| p.cols()).sum();
    let mut out = Tensor2D::zeros(len, width);
    for t in 0..len {
        let row = out.row_mut(t);
        let mut at = 0;
        for p in parts {
            row[at..at + p.cols()].copy_from_slice(p.row(t));
            at += p.cols();
        }
    }
    Ok(out)
}

/// `out[i] = x[i - 1]` for `i >= 1`; row 0 is zero.
pub fn shift_down(x: &Tensor2D) -> Tensor2D {
    let mut out = x.same_shape_zeros();
    let cols = x.cols();
    if x.rows() > 1 {
        out.data_mut()[cols..].copy_from_slice(&x.data()[..(x.rows() - 1) * cols]);
    }
    out
}

pub fn shift_down_backward(grad_out: &Tensor2D) -> Tensor2D {
    let mut g = grad_out.same_shape_zeros();
    let cols = grad_out.cols();
    let rows = grad_out.rows();
    if rows > 1 {
        g.data_mut()[..(rows - 1) * cols].copy_from_slice(&grad_out.data()[cols..]);
    }
    g
}

/// Temporal neighborhood `max(0, i - k) ..= min(len - 1, i + k)`.
pub fn neighborhood(i: usize, len: usize, half_width: usize) -> std::ops::RangeInclusive<usize> {
    i.saturating_sub(half_width)..=(i + half_width).min(len - 1)
}

fn check_contrastive(pred: &Tensor2D, target: &Tensor2D, half_width: usize) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} and embedding {:?} differ in shape",
            pred.shape(),
            target.shape()
        )));
    }
    if half_width == 0 {
        return Err(Error::Config(
            "contrastive neighborhood half-width must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Predictive contrastive loss over one sequence.
///
/// For each `i >= 1`, scores `pred[i]` against every embedding in the
/// temporal neighborhood of `i` and takes the negative log-probability of
/// the true embedding `target[i]`. Row 0 of `pred` is ignored.
pub fn contrastive_loss(pred: &Tensor2D, target: &Tensor2D, half_width: usize) -> Result<f64> {
    check_contrastive(pred, target, half_width)?;
    let len = pred.rows();
    let mut total = 0.0;
    let mut sims = Vec::with_capacity(2 * half_width + 1);
    for i in 1..len {
        let f = pred.row(i);
        sims.clear();
        let mut positive = 0.0;
        for j in neighborhood(i, len, half_width) {
            let s = dot(f, target.row(j));
            if j == i {
                positive = s;
            }
            sims.push(s);
        }
        total += log_sum_exp(&sims) - positive;
    }
    Ok(total)
}

/// Gradients of [`contrastive_loss`] with respect to `(pred, target)`,
/// scaled by the scalar upstream gradient `g`.
pub fn contrastive_loss_backward(
    pred: &Tensor2D,
    target: &Tensor2D,
    half_width: usize,
    g: f64,
) -> (Tensor2D, Tensor2D) {
    let (len, dim) = pred.shape();
    let mut gp = pred.same_shape_zeros();
    let mut gt = target.same_shape_zeros();
    let mut probs = Vec::with_capacity(2 * half_width + 1);
    for i in 1..len {
        let hood = neighborhood(i, len, half_width);
        let f = pred.row(i);
        probs.clear();
        probs.extend(hood.clone().map(|j| dot(f, target.row(j))));
        let lse = log_sum_exp(&probs);
        probs.iter_mut().for_each(|s| *s = (*s - lse).exp());

        for (p, j) in probs.iter().zip(hood) {
            let w = g * (p - if j == i { 1.0 } else { 0.0 });
            let xj = target.row(j);
            for d in 0..dim {
                gp.data_mut()[i * dim + d] += w * xj[d];
                gt.data_mut()[j * dim + d] += w * f[d];
            }
        }
    }
    (gp, gt)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max-shifted log-sum-exp.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn map(x: &Tensor2D, f: impl Fn(f64) -> f64) -> Tensor2D {
    let mut out = x.same_shape_zeros();
    for (o, &v) in out.data_mut().iter_mut().zip(x.data()) {
        *o = f(v);
    }
    out
}

pub(crate) fn zip_map(a: &Tensor2D, b: &Tensor2D, f: impl Fn(f64, f64) -> f64) -> Tensor2D {
    let mut out = a.same_shape_zeros();
    for ((o, &x), &y) in out.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
        *o = f(x, y);
    }
    out
}
