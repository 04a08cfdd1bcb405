use std::collections::BTreeMap;

use super::{fisher_z_average, srocc, EvalReport, FoldReport, Prediction, RunReport, TaskScore};
use crate::data::{SplitPlan, Trial};
use crate::error::{Error, Result};
use crate::model::{train, Model, ModelConfig, TrainConfig, TrainSample};
use crate::numcore::Rng;
use crate::par::Execution;

/// Something that can be trained on some trials and then score others.
pub trait Learner: Sync {
    /// Short label recorded in reports.
    fn describe(&self) -> String;

    fn fit_predict(
        &self,
        train: &[&Trial],
        test: &[&Trial],
        seed: u64,
        exec: Execution,
    ) -> Result<Vec<f64>>;
}

/// The multi-path model trained from fresh parameters per fold.
#[derive(Clone, Debug)]
pub struct ModelLearner {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl ModelLearner {
    pub fn fit(&self, train_set: &[&Trial], seed: u64, exec: Execution) -> Result<Model> {
        let mut model = Model::new(self.model.clone(), seed)?;
        let targets = train_set
            .iter()
            .map(|t| t.target())
            .collect::<Result<Vec<_>>>()?;
        let samples: Vec<TrainSample> = train_set
            .iter()
            .zip(&targets)
            .map(|(t, &target)| TrainSample {
                features: &t.features,
                target,
            })
            .collect();
        let cfg = TrainConfig {
            seed,
            ..self.train.clone()
        };
        train(&mut model, &samples, &cfg, exec)?;
        Ok(model)
    }
}

impl Learner for ModelLearner {
    fn describe(&self) -> String {
        let paths = self.model.path_set().to_string();
        if self.model.contrastive {
            paths
        } else {
            format!("{paths} (no contrastive)")
        }
    }

    fn fit_predict(
        &self,
        train_set: &[&Trial],
        test: &[&Trial],
        seed: u64,
        exec: Execution,
    ) -> Result<Vec<f64>> {
        let model = self.fit(train_set, seed, exec)?;
        exec.map(test, |t| model.forward(&t.features).map(|tr| tr.q))
            .into_iter()
            .collect()
    }
}

/// Seed for one run of the experiment.
pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    base_seed.wrapping_add(run as u64)
}

fn fold_seed(run_seed: u64, fold: usize) -> u64 {
    Rng::derive(run_seed, &format!("fold-{fold}")).next_u64()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-task SROCC over pooled out-of-fold predictions, then Fisher z overall.
pub fn score_predictions(
    predictions: &[&Prediction],
) -> Result<(BTreeMap<String, TaskScore>, f64)> {
    let mut by_task: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in predictions {
        let e = by_task.entry(p.task_id.clone()).or_default();
        e.0.push(p.q);
        e.1.push(p.y);
    }
    let mut per_task = BTreeMap::new();
    for (task, (q, y)) in by_task {
        let n = q.len();
        let score = if n < 2 {
            TaskScore {
                n,
                srocc: 0.0,
                degenerate: true,
            }
        } else {
            let s = srocc(&q, &y)?;
            TaskScore {
                n,
                srocc: s.rho,
                degenerate: s.degenerate,
            }
        };
        per_task.insert(task, score);
    }
    if per_task.is_empty() {
        return Err(Error::Data("no predictions to score".into()));
    }
    let rs: Vec<f64> = per_task.values().map(|t| t.srocc).collect();
    Ok((per_task, fisher_z_average(&rs)?))
}

/// Cross-validates `learner` over `plan`, repeated for `n_runs` seeds.
///
/// Every (run, fold) job trains from fresh parameters seeded from
/// `base_seed`, so the report depends only on the inputs, never on how the
/// jobs were scheduled.
pub fn cross_validate<L: Learner>(
    trials: &[Trial],
    plan: &SplitPlan,
    learner: &L,
    n_runs: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<EvalReport> {
    if n_runs == 0 {
        return Err(Error::Config("need at least one run".into()));
    }
    plan.check_covers(trials.iter().map(|t| t.meta.trial_id.as_str()))?;
    let targets = trials
        .iter()
        .map(|t| t.target())
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..n_runs)
        .flat_map(|r| (0..plan.n_folds).map(move |f| (r, f)))
        .collect();
    let folds = exec
        .map(&jobs, |&(run, fold)| -> Result<FoldReport> {
            let (mut train_set, mut test, mut test_y) = (Vec::new(), Vec::new(), Vec::new());
            for (t, &y) in trials.iter().zip(&targets) {
                if plan.fold_of(&t.meta.trial_id) == Some(fold) {
                    test.push(t);
                    test_y.push(y);
                } else {
                    train_set.push(t);
                }
            }
            let seed = fold_seed(run_seed(base_seed, run), fold);
            let q = if test.is_empty() {
                Vec::new()
            } else {
                learner.fit_predict(&train_set, &test, seed, exec)?
            };
            let predictions: Vec<Prediction> = test
                .iter()
                .zip(&test_y)
                .zip(&q)
                .map(|((t, &y), &q)| Prediction {
                    trial_id: t.meta.trial_id.clone(),
                    task_id: t.meta.task_id.clone(),
                    y,
                    q,
                })
                .collect();
            let (srocc_value, degenerate) = if predictions.len() < 2 {
                (None, true)
            } else {
                let s = srocc(&q, &test_y)?;
                (Some(s.rho), s.degenerate)
            };
            Ok(FoldReport {
                fold,
                n_train: train_set.len(),
                predictions,
                srocc: srocc_value,
                degenerate,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::with_capacity(n_runs);
    for (run, chunk) in folds.chunks(plan.n_folds).enumerate() {
        let preds: Vec<&Prediction> = chunk.iter().flat_map(|f| &f.predictions).collect();
        let (per_task, overall) = score_predictions(&preds)?;
        runs.push(RunReport {
            run,
            seed: run_seed(base_seed, run),
            folds: chunk.to_vec(),
            per_task,
            overall,
        });
    }

    let overall: Vec<f64> = runs.iter().map(|r| r.overall).collect();
    let (mean_overall, std_overall) = mean_std(&overall);
    let mut per_task_mean = BTreeMap::new();
    for task in runs[0].per_task.keys() {
        let vals: Vec<f64> = runs.iter().map(|r| r.per_task[task].srocc).collect();
        per_task_mean.insert(task.clone(), mean_std(&vals).0);
    }
    Ok(EvalReport {
        paths: learner.describe(),
        scheme: plan.scheme.to_string(),
        runs,
        mean_overall,
        std_overall,
        per_task_mean,
    })
}
