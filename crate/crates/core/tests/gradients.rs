mod common;

use common::gradcheck::{check_full_loss, check_graph, random_tensor};
use skillpath_core::numcore::{Graph, Rng, Tensor2D, Var};

const SAMPLES: usize = 100;

fn check_op<B>(inputs: Vec<Tensor2D>, build: B)
where
    B: Fn(&mut Graph, &[Var]) -> Var,
{
    check_graph(inputs, build, SAMPLES, 7).unwrap();
}

#[test]
fn temporal_conv_gradients() {
    let mut rng = Rng::new(1);
    for dilation in [1, 2, 3] {
        let x = random_tensor(11, 3, 1.0, &mut rng);
        let w = random_tensor(5 * 3, 4, 0.5, &mut rng);
        let b = random_tensor(1, 4, 0.5, &mut rng);
        check_op(vec![x, w, b], |g, v| {
            g.temporal_conv(v[0], v[1], v[2], dilation).unwrap()
        });
    }
}

#[test]
fn affine_gradients() {
    let mut rng = Rng::new(2);
    let x = random_tensor(9, 5, 1.0, &mut rng);
    let w = random_tensor(5, 3, 1.0, &mut rng);
    let b = random_tensor(1, 3, 1.0, &mut rng);
    check_op(vec![x, w, b], |g, v| g.affine(v[0], v[1], v[2]).unwrap());
}

#[test]
fn softmax_over_time_gradients() {
    let mut rng = Rng::new(3);
    let x = random_tensor(17, 1, 2.0, &mut rng);
    check_op(vec![x], |g, v| g.softmax_over_time(v[0]).unwrap());
}

#[test]
fn elementwise_gradients() {
    let mut rng = Rng::new(4);
    let a = random_tensor(6, 3, 1.0, &mut rng);
    let b = random_tensor(6, 3, 1.0, &mut rng);
    check_op(vec![a.clone()], |g, v| g.sigmoid(v[0]));
    check_op(vec![a.clone()], |g, v| g.relu(v[0]));
    check_op(vec![a.clone()], |g, v| g.shift_down(v[0]));
    check_op(vec![a.clone(), b.clone()], |g, v| {
        g.mul(v[0], v[1]).unwrap()
    });
    check_op(vec![a.clone(), b.clone()], |g, v| {
        g.sub(v[0], v[1]).unwrap()
    });
    check_op(vec![a, b], |g, v| {
        let c = g.concat_cols(&[v[0], v[1]]).unwrap();
        g.square(c)
    });
}

#[test]
fn contrastive_loss_gradients() {
    let mut rng = Rng::new(5);
    for half_width in [1, 3, 8] {
        let f = random_tensor(14, 4, 0.7, &mut rng);
        let x = random_tensor(14, 4, 0.7, &mut rng);
        check_op(vec![f, x], |g, v| {
            g.contrastive_loss(v[0], v[1], half_width).unwrap()
        });
    }
}

#[test]
fn random_three_layer_composition() {
    // conv -> relu -> affine -> sigmoid -> softmax-weighted sum
    let mut rng = Rng::new(6);
    let inputs = vec![
        random_tensor(12, 3, 1.0, &mut rng),
        random_tensor(9, 5, 0.6, &mut rng),
        random_tensor(1, 5, 0.3, &mut rng),
        random_tensor(5, 1, 0.6, &mut rng),
        random_tensor(1, 1, 0.3, &mut rng),
        random_tensor(5, 1, 0.6, &mut rng),
    ];
    check_op(inputs, |g, v| {
        let h = g.temporal_conv(v[0], v[1], v[2], 2).unwrap();
        let h = g.relu(h);
        let s = g.affine(h, v[3], v[4]).unwrap();
        let s = g.sigmoid(s);
        let zero = g.constant(Tensor2D::zeros(1, 1));
        let logits = g.affine(h, v[5], zero).unwrap();
        let w = g.softmax_over_time(logits).unwrap();
        let sw = g.mul(s, w).unwrap();
        g.sum(sw)
    });
}

#[test]
fn end_to_end_full_loss_gradients() {
    let report = check_full_loss(16, 50, 8).unwrap();
    assert_eq!(report.checked, 50);
}
