//! Path and contrastive ablations on a synthetic dataset.
//!
//! `cargo run --release -p skillpath-core --example synthetic_ablation -- [n_trials] [epochs] [runs] [lr] [contrastive_weight] [VTPE,V,...]`

use std::time::Instant;

use skillpath_core::data::{make_splits, synth_trials, SplitScheme, SynthConfig, Trial};
use skillpath_core::eval::{cross_validate, ModelLearner};
use skillpath_core::model::{ModelConfig, PathSet, TrainConfig};
use skillpath_core::numcore::AdamConfig;
use skillpath_core::Execution;

fn main() -> skillpath_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n_trials = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40);
    let runs = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5);
    let lr = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let con_weight: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let only: Option<String> = args.get(6).cloned();

    let synth = SynthConfig {
        n_trials,
        ..Default::default()
    };
    let exec = Execution::available();
    let trials: Vec<Trial> = synth_trials(&synth, exec)?
        .into_iter()
        .map(|s| s.trial)
        .collect();
    let metas: Vec<_> = trials.iter().map(|t| t.meta.clone()).collect();
    let plan = make_splits(&metas, SplitScheme::KFold(3), 0)?;
    let train = TrainConfig {
        epochs,
        adam: AdamConfig {
            lr,
            ..Default::default()
        },
        ..Default::default()
    };

    for (paths, contrastive) in [
        ("VTPE", true),
        ("VTPE", false),
        ("V", true),
        ("T", true),
        ("E", true),
        ("P", true),
    ] {
        let set: PathSet = paths.parse()?;
        let mut model = ModelConfig::new(&synth.dims(), &set)?;
        model.contrastive = contrastive;
        model.contrastive_weight = con_weight;
        if let Some(o) = &only {
            if !o.split(',').any(|x| x == paths) {
                continue;
            }
        }
        let learner = ModelLearner {
            model,
            train: train.clone(),
        };
        let start = Instant::now();
        let report = cross_validate(&trials, &plan, &learner, runs, 0, exec)?;
        let per_run: Vec<String> = report
            .runs
            .iter()
            .map(|r| format!("{:.3}", r.overall))
            .collect();
        println!(
            "{:<24} mean {:.4} sd {:.4} runs [{}] ({:.1}s)",
            report.paths,
            report.mean_overall,
            report.std_overall,
            per_run.join(", "),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
