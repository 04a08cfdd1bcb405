//! Central finite-difference gradient checking.

use skillpath_core::model::{Model, ModelConfig, PathId, PathSet};
use skillpath_core::numcore::{Graph, Rng, Tensor2D, Var};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Below this absolute gap two derivatives are treated as equal; it sits
/// above the rounding noise of a central difference with `STEP`.
pub const ABS_FLOOR: f64 = 1e-9;

#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub kinks_skipped: usize,
    pub worst_rel: f64,
    pub worst_abs: f64,
}

pub fn agrees(analytic: f64, numeric: f64) -> bool {
    let gap = (analytic - numeric).abs();
    gap <= ABS_FLOOR || gap <= REL_TOL * analytic.abs().max(numeric.abs())
}

fn rel_err(a: f64, n: f64) -> f64 {
    let gap = (a - n).abs();
    if gap <= ABS_FLOOR {
        0.0
    } else {
        gap / a.abs().max(n.abs())
    }
}

/// Compares `analytic[i]` with central differences of `f` at `samples`
/// randomly chosen coordinates across all `inputs`.
///
/// A coordinate whose left and right one-sided differences disagree sits on
/// a relu kink, where the derivative is not defined; it is replaced by
/// another draw.
pub fn check<F>(
    f: F,
    inputs: &[Tensor2D],
    analytic: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<GradCheck, String>
where
    F: Fn(&[Tensor2D]) -> f64,
{
    let total: usize = inputs.iter().map(Tensor2D::len).sum();
    assert!(total > 0);
    let mut rng = Rng::new(seed);
    let mut report = GradCheck::default();
    let base = f(inputs);
    let mut attempts = 0;
    while report.checked < samples.min(total) {
        attempts += 1;
        if attempts > 20 * samples {
            return Err(format!("too many kinks: {report:?}"));
        }
        let mut flat = rng.below(total);
        let mut which = 0;
        while flat >= inputs[which].len() {
            flat -= inputs[which].len();
            which += 1;
        }
        let eval_at = |delta: f64| {
            let mut moved = inputs.to_vec();
            moved[which].data_mut()[flat] += delta;
            f(&moved)
        };
        let plus = eval_at(STEP);
        let minus = eval_at(-STEP);
        let numeric = (plus - minus) / (2.0 * STEP);
        let right = (plus - base) / STEP;
        let left = (base - minus) / STEP;
        if (right - left).abs() > 1e-3 * right.abs().max(left.abs()).max(1e-3) {
            report.kinks_skipped += 1;
            continue;
        }
        let a = analytic[which][flat];
        report.worst_rel = report.worst_rel.max(rel_err(a, numeric));
        report.worst_abs = report.worst_abs.max((a - numeric).abs());
        if !agrees(a, numeric) {
            return Err(format!(
                "input {which} coordinate {flat}: analytic {a:e} vs numeric {numeric:e}"
            ));
        }
        report.checked += 1;
    }
    Ok(report)
}

pub fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Tensor2D {
    let data = (0..rows * cols).map(|_| rng.normal(0.0, scale)).collect();
    Tensor2D::from_vec(rows, cols, data).unwrap()
}

/// Reduces an op output to a scalar through a fixed random projection, so
/// every output entry contributes to the checked gradient.
fn scalarize(g: &mut Graph, out: Var, seed: u64) -> Var {
    if g.value(out).shape() == (1, 1) {
        return out;
    }
    let (r, c) = g.value(out).shape();
    let proj = g.constant(random_tensor(r, c, 1.0, &mut Rng::new(seed)));
    let prod = g.mul(out, proj).unwrap();
    g.sum(prod)
}

/// Checks the graph built by `build` over parameters holding `inputs`.
pub fn check_graph<B>(
    inputs: Vec<Tensor2D>,
    build: B,
    samples: usize,
    seed: u64,
) -> Result<GradCheck, String>
where
    B: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |xs: &[Tensor2D], grads: bool| {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.param(x.clone())).collect();
        let out = build(&mut g, &vars);
        let loss = scalarize(&mut g, out, seed ^ 0x5eed);
        let value = g.value(loss).data()[0];
        if !grads {
            return (value, Vec::new());
        }
        g.backward(loss).unwrap();
        let gs = vars
            .iter()
            .map(|&v| {
                g.grad(v)
                    .map_or_else(|| vec![0.0; g.value(v).len()], |t| t.data().to_vec())
            })
            .collect();
        (value, gs)
    };
    let (_, analytic) = eval(&inputs, true);
    let report = check(|xs| eval(xs, false).0, &inputs, &analytic, samples, seed)?;
    let want = samples.min(inputs.iter().map(Tensor2D::len).sum());
    if report.checked < want {
        return Err(format!(
            "only {} of {want} coordinates checked",
            report.checked
        ));
    }
    Ok(report)
}

fn model_with_params(model: &Model, values: &[Tensor2D]) -> Model {
    let mut m = model.clone();
    let ids: Vec<_> = m.block().iter().map(|(id, _)| id).collect();
    for (id, v) in ids.into_iter().zip(values) {
        *m.block_mut().get_mut(id) = v.clone();
    }
    m
}

/// Full training loss of a fresh four-path model on one random trial of
/// length `len`, checked at `samples` parameter coordinates.
pub fn check_full_loss(len: usize, samples: usize, seed: u64) -> Result<GradCheck, String> {
    let mut rng = Rng::new(seed);
    let dims = [6, 5, 1, 4];
    let features = super::random_features(len, dims, &mut rng);
    let dim_map = PathId::ALL.iter().copied().zip(dims).collect();
    let mut cfg = ModelConfig::new(&dim_map, &PathSet::all()).map_err(|e| e.to_string())?;
    cfg.half_width = 3;
    let model = Model::new(cfg, seed + 1).map_err(|e| e.to_string())?;
    let y = 0.37;

    let params: Vec<Tensor2D> = model.block().iter().map(|(_, p)| p.value.clone()).collect();
    let (_, grads) = model
        .loss_and_grads(&features, y)
        .map_err(|e| e.to_string())?;
    let analytic = grads
        .into_iter()
        .enumerate()
        .map(|(i, g)| g.ok_or_else(|| format!("parameter {i} received no gradient")))
        .collect::<Result<Vec<_>, _>>()?;
    check(
        |xs| {
            model_with_params(&model, xs)
                .full_loss(&features, y)
                .unwrap()
                .0
                .full
        },
        &params,
        &analytic,
        samples,
        seed + 2,
    )
}
