//! Synthetic trials with a planted skill latent.
//!
//! Each trial draws a skill `u ~ U[0, 1]`. Unskilled trials (small `u`) get
//! longer, jerkier tool trajectories and loopier event workflows; the proxy
//! channel hovers around `u`; the visual path is a fixed random projection
//! of the other three.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{denormalize_grs, write_sequence, Manifest, Trial, TrialMeta, TrialRecord};
use crate::error::{Error, Result};
use crate::model::{PathFeatures, PathId};
use crate::numcore::{Rng, Tensor2D};
use crate::par::Execution;

/// Spatial histogram cells of the tool path (3x3 grid).
pub const TOOL_GRID_CELLS: usize = 9;
/// Kinematic channels that may follow the histogram: speed, turn, x, y.
pub const TOOL_EXTRA_CHANNELS: usize = 4;
/// Trailing window of the tool histogram, in steps.
const TOOL_WINDOW: usize = 8;
/// Probability per step of leaving the current event.
const EVENT_MOVE_PROB: f64 = 0.06;
/// Exponential smoothing of event probability rows.
const EVENT_SMOOTHING: f64 = 0.5;
/// Mass spread evenly over all events before smoothing.
const EVENT_FLOOR: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_trials: usize,
    pub length_min: usize,
    pub length_max: usize,
    pub dim_v: usize,
    /// 9 histogram cells plus up to 4 kinematic channels.
    pub dim_t: usize,
    pub event_classes: usize,
    pub noise_proxy: f64,
    pub noise_tool: f64,
    pub noise_event: f64,
    pub noise_visual: f64,
    /// Half-width of the uniform rating noise, as a fraction of the range.
    pub noise_grs: f64,
    /// Backward-jump coefficient: jump probability is `beta * (1 - u)`.
    pub beta: f64,
    pub n_users: usize,
    pub tasks: Vec<String>,
    pub grs_range: (f64, f64),
    pub fps: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_trials: 60,
            length_min: 200,
            length_max: 600,
            dim_v: 16,
            dim_t: 9,
            event_classes: 6,
            noise_proxy: 0.2,
            noise_tool: 0.05,
            noise_event: 0.1,
            noise_visual: 0.1,
            noise_grs: 0.05,
            beta: 0.3,
            n_users: 8,
            tasks: vec!["sim".into()],
            grs_range: (6.0, 30.0),
            fps: 5.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.length_min == 0 || self.length_min > self.length_max {
            return bad("need 0 < length_min <= length_max");
        }
        if self.dim_v == 0 || self.event_classes < 2 {
            return bad("dim_v must be positive and event_classes at least 2");
        }
        if !(TOOL_GRID_CELLS..=TOOL_GRID_CELLS + TOOL_EXTRA_CHANNELS).contains(&self.dim_t) {
            return bad("dim_t must be between 9 and 13");
        }
        let noises = [
            self.noise_proxy,
            self.noise_tool,
            self.noise_event,
            self.noise_visual,
            self.noise_grs,
        ];
        if noises.iter().any(|n| !(*n >= 0.0) || !n.is_finite()) {
            return bad("noise levels must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.noise_event) || !(0.0..=1.0).contains(&self.beta) {
            return bad("noise_event and beta must lie in [0, 1]");
        }
        if self.n_users == 0 || self.tasks.is_empty() {
            return bad("need at least one user and one task");
        }
        if !(self.grs_range.0 < self.grs_range.1) || !(self.fps > 0.0) {
            return bad("invalid rating range or frame rate");
        }
        Ok(())
    }

    pub fn dims(&self) -> BTreeMap<PathId, usize> {
        [
            (PathId::V, self.dim_v),
            (PathId::T, self.dim_t),
            (PathId::P, 1),
            (PathId::E, self.event_classes),
        ]
        .into_iter()
        .collect()
    }
}

/// A generated trial with the latent that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthTrial {
    pub trial: Trial,
    pub skill: f64,
    pub backward_jumps: usize,
}

/// Hidden event states of the cyclic left-to-right chain and the number of
/// backward jumps taken.
///
/// Each step consumes exactly two uniforms, so chains for different `skill`
/// values under the same stream are coupled.
pub fn event_chain(
    skill: f64,
    len: usize,
    classes: usize,
    beta: f64,
    rng: &mut Rng,
) -> (Vec<usize>, usize) {
    let back_prob = beta * (1.0 - skill);
    let mut state = 0;
    let mut backward = 0;
    let mut states = Vec::with_capacity(len);
    for _ in 0..len {
        states.push(state);
        let moves = rng.uniform() < EVENT_MOVE_PROB;
        let back = rng.uniform() < back_prob;
        if moves {
            if back {
                state = (state + classes - 1) % classes;
                backward += 1;
            } else {
                state = (state + 1) % classes;
            }
        }
    }
    (states, backward)
}

fn event_features(states: &[usize], classes: usize, label_noise: f64, rng: &mut Rng) -> Tensor2D {
    let mut out = Tensor2D::zeros(states.len(), classes);
    let mut prev: Option<Vec<f64>> = None;
    for (t, &s) in states.iter().enumerate() {
        let flip = rng.uniform() < label_noise;
        let random_label = rng.below(classes);
        let label = if flip { random_label } else { s };
        let mut row: Vec<f64> = (0..classes)
            .map(|c| {
                EVENT_FLOOR / classes as f64 + if c == label { 1.0 - EVENT_FLOOR } else { 0.0 }
            })
            .collect();
        if let Some(p) = &prev {
            for (r, q) in row.iter_mut().zip(p) {
                *r = EVENT_SMOOTHING * *q + (1.0 - EVENT_SMOOTHING) * *r;
            }
        }
        out.row_mut(t).copy_from_slice(&row);
        prev = Some(row);
    }
    out
}

fn reflect(v: f64) -> f64 {
    let mut v = v;
    while !(0.0..=1.0).contains(&v) {
        v = if v < 0.0 { -v } else { 2.0 - v };
    }
    v
}

fn tool_features(skill: f64, len: usize, dim: usize, noise: f64, rng: &mut Rng) -> Tensor2D {
    let rough = 1.0 - skill;
    let (mut x, mut y) = (rng.uniform_range(0.3, 0.7), rng.uniform_range(0.3, 0.7));
    let mut heading = rng.uniform_range(0.0, std::f64::consts::TAU);
    let mut history: Vec<(f64, f64)> = Vec::with_capacity(len);
    let mut out = Tensor2D::zeros(len, dim);
    for t in 0..len {
        let turn = rng.normal(0.0, 0.1 + 1.2 * rough);
        heading += turn;
        let speed = (0.01 + 0.03 * rough) * rng.normal(1.0, 0.3).abs();
        x = reflect(x + speed * heading.cos());
        y = reflect(y + speed * heading.sin());
        history.push((x, y));

        let row = out.row_mut(t);
        let window = &history[history.len().saturating_sub(TOOL_WINDOW)..];
        for &(px, py) in window {
            let cx = ((px * 3.0) as usize).min(2);
            let cy = ((py * 3.0) as usize).min(2);
            row[cy * 3 + cx] += 1.0 / window.len() as f64;
        }
        let extras = [speed * 10.0, turn.abs(), x, y];
        for (slot, v) in row[TOOL_GRID_CELLS..].iter_mut().zip(extras) {
            *slot = v;
        }
        for v in row.iter_mut() {
            *v += rng.normal(0.0, noise);
        }
    }
    out
}

fn proxy_features(skill: f64, len: usize, noise: f64, rng: &mut Rng) -> Tensor2D {
    let values: Vec<f64> = (0..len)
        .map(|_| (skill + rng.normal(0.0, noise)).clamp(0.0, 1.0))
        .collect();
    Tensor2D::column(&values)
}

/// Fixed projection shared by every trial of a dataset.
fn visual_projection(cfg: &SynthConfig) -> Tensor2D {
    let din = cfg.dim_t + 1 + cfg.event_classes;
    let mut rng = Rng::derive(cfg.seed, "synth-visual-projection");
    let sd = 1.0 / (din as f64).sqrt();
    let data = (0..din * cfg.dim_v).map(|_| rng.normal(0.0, sd)).collect();
    Tensor2D::from_vec(din, cfg.dim_v, data).expect("sized")
}

fn visual_features(
    others: &[&Tensor2D],
    proj: &Tensor2D,
    noise: f64,
    rng: &mut Rng,
) -> Result<Tensor2D> {
    let joined = crate::numcore::ops::concat_cols(others)?;
    let mut out = crate::numcore::ops::affine(&joined, proj, &Tensor2D::zeros(1, proj.cols()))?;
    for v in out.data_mut() {
        *v += rng.normal(0.0, noise);
    }
    Ok(out)
}

/// Round-trips every value through `f32`, matching what sequence files store.
fn storage_precision(mut x: Tensor2D) -> Tensor2D {
    for v in x.data_mut() {
        *v = f64::from(*v as f32);
    }
    x
}

fn generate_trial(cfg: &SynthConfig, index: usize, proj: &Tensor2D) -> Result<SynthTrial> {
    let mut rng = Rng::derive(cfg.seed ^ index as u64, "synth-trial");
    let skill = rng.uniform();
    let span = (cfg.length_max - cfg.length_min) as f64;
    let pace = (0.75 * (1.0 - skill) + 0.25 * rng.uniform()).clamp(0.0, 1.0);
    let len = cfg.length_min + (span * pace).round() as usize;

    let noisy = (skill + rng.uniform_range(-cfg.noise_grs, cfg.noise_grs)).clamp(0.0, 1.0);
    let grs = denormalize_grs(noisy, cfg.grs_range)?.clamp(cfg.grs_range.0, cfg.grs_range.1);

    let mut chain_rng = Rng::derive(cfg.seed ^ index as u64, "synth-events");
    let (states, backward_jumps) =
        event_chain(skill, len, cfg.event_classes, cfg.beta, &mut chain_rng);
    let event = event_features(&states, cfg.event_classes, cfg.noise_event, &mut rng);
    let tool = tool_features(skill, len, cfg.dim_t, cfg.noise_tool, &mut rng);
    let proxy = proxy_features(skill, len, cfg.noise_proxy, &mut rng);
    let visual = visual_features(&[&tool, &proxy, &event], proj, cfg.noise_visual, &mut rng)?;

    let features: PathFeatures = [
        (PathId::V, visual),
        (PathId::T, tool),
        (PathId::P, proxy),
        (PathId::E, event),
    ]
    .into_iter()
    .map(|(id, x)| (id, storage_precision(x)))
    .collect();

    let meta = TrialMeta {
        trial_id: format!("trial_{index:04}"),
        task_id: cfg.tasks[index % cfg.tasks.len()].clone(),
        user_id: format!("user_{:02}", (index / cfg.tasks.len()) % cfg.n_users),
        grs,
        grs_range: cfg.grs_range,
    };
    Ok(SynthTrial {
        trial: Trial { meta, features },
        skill,
        backward_jumps,
    })
}

/// Generates all trials in memory; per-trial streams make the result
/// independent of scheduling.
pub fn synth_trials(cfg: &SynthConfig, exec: Execution) -> Result<Vec<SynthTrial>> {
    cfg.validate()?;
    let proj = visual_projection(cfg);
    exec.map_range(cfg.n_trials, |i| generate_trial(cfg, i, &proj))
        .into_iter()
        .collect()
}

/// Writes a generated dataset: `manifest.json` plus `seq/<trial>_<path>.umsa`.
pub fn synth_generate(
    cfg: &SynthConfig,
    out_dir: &Path,
    exec: Execution,
) -> Result<(Manifest, Vec<SynthTrial>)> {
    let trials = synth_trials(cfg, exec)?;
    let seq_dir = out_dir.join("seq");
    fs::create_dir_all(&seq_dir).map_err(|e| Error::io(&seq_dir, e))?;

    let records = exec
        .map(&trials, |st| -> Result<TrialRecord> {
            let meta = &st.trial.meta;
            let mut paths = BTreeMap::new();
            for (id, x) in &st.trial.features {
                let rel = format!("seq/{}_{id}.umsa", meta.trial_id);
                write_sequence(x, &out_dir.join(&rel))?;
                paths.insert(*id, rel);
            }
            Ok(TrialRecord {
                meta: meta.clone(),
                fps: Some(cfg.fps),
                paths,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest::new(records, out_dir);
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok((manifest, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_trials: 12,
            length_min: 40,
            length_max: 80,
            ..Default::default()
        }
    }

    #[test]
    fn skilled_chain_never_steps_back() {
        let mut rng = Rng::new(5);
        let (states, back) = event_chain(1.0, 2000, 6, 0.3, &mut rng);
        assert_eq!(back, 0);
        for w in states.windows(2) {
            assert!(w[1] == w[0] || w[1] == (w[0] + 1) % 6);
        }
    }

    #[test]
    fn backward_jumps_monotone_in_skill() {
        for seed in 0..20 {
            let counts: Vec<usize> = [0.0, 0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|&u| event_chain(u, 500, 6, 0.3, &mut Rng::new(seed)).1)
                .collect();
            assert!(
                counts.windows(2).all(|w| w[1] <= w[0]),
                "seed {seed}: {counts:?}"
            );
        }
    }

    #[test]
    fn noiseless_proxy_equals_skill() {
        let cfg = SynthConfig {
            noise_proxy: 0.0,
            ..small()
        };
        for st in synth_trials(&cfg, Execution::Sequential).unwrap() {
            let p = &st.trial.features[&PathId::P];
            let expect = f64::from(st.skill as f32);
            assert!(p.data().iter().all(|&v| v == expect));
        }
    }

    #[test]
    fn event_rows_are_distributions() {
        for st in synth_trials(&small(), Execution::Sequential).unwrap() {
            let e = &st.trial.features[&PathId::E];
            for t in 0..e.rows() {
                let s: f64 = e.row(t).iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
                assert!(e.row(t).iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn shapes_and_ranges() {
        let cfg = small();
        for st in synth_trials(&cfg, Execution::Sequential).unwrap() {
            let len = st.trial.len();
            assert!((cfg.length_min..=cfg.length_max).contains(&len));
            for (id, x) in &st.trial.features {
                assert_eq!(x.rows(), len);
                assert_eq!(x.cols(), cfg.dims()[id]);
            }
            st.trial.meta.validate().unwrap();
        }
    }

    #[test]
    fn scheduling_does_not_change_output() {
        let a = synth_trials(&small(), Execution::Sequential).unwrap();
        let b = synth_trials(&small(), Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs() {
        assert!(SynthConfig {
            dim_t: 4,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SynthConfig {
            length_min: 0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SynthConfig {
            tasks: vec![],
            ..small()
        }
        .validate()
        .is_err());
    }
}
