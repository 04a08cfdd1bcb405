use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use skillpath_core::data::{make_splits, synth_generate, Manifest, SplitPlan, Trial, TrialMeta};
use skillpath_core::eval::{
    correlation_analysis, cross_validate, write_predictions_csv, EvalReport, Learner, ModelLearner,
};
use skillpath_core::model::{train, write_trace_csv, Model, PathId, PathSet, TrainSample};
use skillpath_core::numcore::{Rng, Tensor2D};
use skillpath_core::Execution;

use crate::checkpoint::Checkpoint;
use crate::config::{LearnerKind, RunConfig};
use crate::provenance::RunRecord;
use crate::{AnalyzeArgs, EvalArgs, GenerateArgs, SplitsArgs, TrainArgs};

const GRS_BINS: usize = 6;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_trials(manifest_path: &Path, target_fps: Option<f64>) -> Result<(Manifest, Vec<Trial>)> {
    let manifest = Manifest::load(manifest_path)?;
    let trials = manifest.load_trials(target_fps)?;
    if trials.is_empty() {
        bail!("manifest {} lists no trials", manifest_path.display());
    }
    Ok((manifest, trials))
}

/// Input width of every path, which must agree across trials.
fn data_dims(trials: &[Trial]) -> Result<BTreeMap<PathId, usize>> {
    let dims: BTreeMap<PathId, usize> = trials[0]
        .features
        .iter()
        .map(|(&id, x)| (id, x.cols()))
        .collect();
    for t in &trials[1..] {
        let these: BTreeMap<PathId, usize> =
            t.features.iter().map(|(&id, x)| (id, x.cols())).collect();
        if these != dims {
            bail!(
                "trial {} has path widths {these:?}, expected {dims:?}",
                t.meta.trial_id
            );
        }
    }
    Ok(dims)
}

fn load_plan(path: &Path) -> Result<SplitPlan> {
    SplitPlan::load(path).with_context(|| format!("cannot read split file {}", path.display()))
}

pub fn generate(args: &GenerateArgs, exec: Execution) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let out = &args.out;
    if out.exists() {
        let non_empty = fs::read_dir(out)
            .with_context(|| format!("reading {}", out.display()))?
            .next()
            .is_some();
        if non_empty && !args.force {
            bail!("{} is not empty; pass --force to overwrite", out.display());
        }
        let seq = out.join("seq");
        if args.force && seq.exists() {
            fs::remove_dir_all(&seq).with_context(|| format!("removing {}", seq.display()))?;
        }
    }
    ensure_dir(out)?;

    let synth = cfg.synth_config();
    if synth.n_trials == 0 {
        log::warn!("n_trials is 0; writing an empty manifest");
    }
    let (_, generated) = synth_generate(&synth, out, exec)?;

    let manifest_path = out.join("manifest.json");
    let back = Manifest::load(&manifest_path)?;
    let reread = back.load_trials(None)?;
    ensure!(
        reread.len() == generated.len(),
        "manifest lists {} trials, generated {}",
        reread.len(),
        generated.len()
    );

    let n = generated.len();
    let mean_len = generated.iter().map(|s| s.trial.len()).sum::<usize>() as f64 / n.max(1) as f64;
    let (lo, hi) = synth.grs_range;
    let mut hist = [0usize; GRS_BINS];
    for s in &generated {
        let frac = (s.trial.meta.grs - lo) / (hi - lo);
        hist[((frac * GRS_BINS as f64) as usize).min(GRS_BINS - 1)] += 1;
    }
    println!("trials: {n}");
    println!("mean length: {mean_len:.1}");
    println!("GRS histogram ({GRS_BINS} bins over [{lo}, {hi}]): {hist:?}");

    let mut record =
        RunRecord::new("generate", Some(cfg.hash()), cfg.seed).input("config", &args.config);
    record.outputs = vec!["manifest.json".into(), "seq/".into()];
    record.write(out)
}

pub fn splits(args: &SplitsArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let metas: Vec<TrialMeta> = manifest.trials.iter().map(|t| t.meta.clone()).collect();
    let plan = make_splits(&metas, args.scheme, args.seed)?;
    ensure_dir(&args.out)?;
    let path = args.out.join("splits.json");
    plan.save(&path)?;
    load_plan(&path)?.check_covers(manifest.trial_ids())?;
    for fold in 0..plan.n_folds {
        println!("fold {fold}: {} trials", plan.fold_members(fold).len());
    }
    let mut record = RunRecord::new("splits", None, args.seed).input("manifest", &args.manifest);
    record.outputs = vec!["splits.json".into()];
    record.write(&args.out)
}

fn apply_paths(cfg: &mut RunConfig, paths: &Option<PathSet>) {
    if let Some(p) = paths {
        cfg.model.paths = p.clone();
    }
}

pub fn train_cmd(args: &TrainArgs, exec: Execution) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_paths(&mut cfg, &args.paths);
    let (manifest, trials) = load_trials(&args.manifest, cfg.data.target_fps)?;
    let model_cfg = cfg.model_config(&data_dims(&trials)?)?;

    let selected: Vec<&Trial> = match (&args.splits, args.fold) {
        (None, None) => trials.iter().collect(),
        (Some(path), Some(fold)) => {
            let plan = load_plan(path)?;
            plan.check_covers(manifest.trial_ids())?;
            if fold >= plan.n_folds {
                bail!(
                    "fold {fold} out of range: the split plan has {} folds",
                    plan.n_folds
                );
            }
            trials
                .iter()
                .filter(|t| plan.fold_of(&t.meta.trial_id) != Some(fold))
                .collect()
        }
        _ => bail!("--splits and --fold must be given together"),
    };
    let targets = selected
        .iter()
        .map(|t| t.target())
        .collect::<skillpath_core::Result<Vec<_>>>()?;
    let samples: Vec<TrainSample> = selected
        .iter()
        .zip(&targets)
        .map(|(t, &target)| TrainSample {
            features: &t.features,
            target,
        })
        .collect();

    let mut model = Model::new(model_cfg, cfg.seed)?;
    let log = train(&mut model, &samples, &cfg.train_config(), exec)?;

    ensure_dir(&args.out)?;
    let ck_path = args.out.join("checkpoint.json");
    Checkpoint::from_model(&model, cfg.data.target_fps, cfg.seed).save(&ck_path)?;
    Checkpoint::load(&ck_path)?.to_model()?;

    let mut csv = create(&args.out.join("train_log.csv"))?;
    writeln!(csv, "epoch,l_mse,l_con,l_full")?;
    for e in &log {
        writeln!(csv, "{},{},{},{}", e.epoch, e.mse, e.con, e.full)?;
    }
    csv.flush()?;
    if let (Some(first), Some(last)) = (log.first(), log.last()) {
        println!(
            "trained on {} trials: L_full {:.5} -> {:.5}",
            samples.len(),
            first.full,
            last.full
        );
    }

    let mut record = RunRecord::new("train", Some(cfg.hash()), cfg.seed)
        .input("config", &args.config)
        .input("manifest", &args.manifest);
    if let Some(s) = &args.splits {
        record = record.input("splits", s);
    }
    record.outputs = vec!["checkpoint.json".into(), "train_log.csv".into()];
    record.write(&args.out)
}

/// Predicts each test trial's true target.
struct OracleLearner;

impl Learner for OracleLearner {
    fn describe(&self) -> String {
        "oracle".into()
    }

    fn fit_predict(
        &self,
        _: &[&Trial],
        test: &[&Trial],
        _: u64,
        _: Execution,
    ) -> skillpath_core::Result<Vec<f64>> {
        test.iter().map(|t| t.target()).collect()
    }
}

pub fn eval(args: &EvalArgs, exec: Execution) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_paths(&mut cfg, &args.paths);
    let plan = load_plan(&args.splits)?;
    let (_, trials) = load_trials(&args.manifest, cfg.data.target_fps)?;
    let dims = data_dims(&trials)?;

    let report: EvalReport = match cfg.eval.learner {
        LearnerKind::Model => {
            let learner = ModelLearner {
                model: cfg.model_config(&dims)?,
                train: cfg.train_config(),
            };
            cross_validate(&trials, &plan, &learner, cfg.eval.n_runs, cfg.seed, exec)?
        }
        LearnerKind::Oracle => cross_validate(
            &trials,
            &plan,
            &OracleLearner,
            cfg.eval.n_runs,
            cfg.seed,
            exec,
        )?,
    };

    ensure_dir(&args.out)?;
    let report_path = args.out.join("report.json");
    let json = report.to_json();
    fs::write(&report_path, json.clone() + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;
    serde_json::from_str::<EvalReport>(&json).context("report does not parse back")?;

    let mut outputs = vec!["report.json".to_string()];
    for run in &report.runs {
        for fold in &run.folds {
            let name = format!("predictions_run{}_fold{}.csv", run.run, fold.fold);
            let mut w = create(&args.out.join(&name))?;
            write_predictions_csv(fold, &mut w)?;
            w.flush()?;
            outputs.push(name);
        }
    }
    println!(
        "{} on {}: SROCC {:.4} +/- {:.4} over {} runs",
        report.paths,
        report.scheme,
        report.mean_overall,
        report.std_overall,
        report.runs.len()
    );

    let mut record = RunRecord::new("eval", Some(cfg.hash()), cfg.seed)
        .input("config", &args.config)
        .input("manifest", &args.manifest)
        .input("splits", &args.splits);
    record.outputs = outputs;
    record.write(&args.out)
}

/// A feature channel to correlate against the weighted score sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelSpec {
    Feature(PathId, usize),
    /// Standard normal noise, seeded per trial.
    Noise,
}

impl std::fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelSpec::Feature(id, c) => write!(f, "{id}:{c}"),
            ChannelSpec::Noise => write!(f, "noise"),
        }
    }
}

impl std::str::FromStr for ChannelSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "noise" {
            return Ok(ChannelSpec::Noise);
        }
        let Some((path, channel)) = s.split_once(':') else {
            bail!("channel {s:?} is neither PATH:INDEX nor noise");
        };
        let mut letters = path.chars();
        let id = match (letters.next(), letters.next()) {
            (Some(c), None) => PathId::from_letter(c)?,
            _ => bail!("channel {s:?}: expected a single path letter"),
        };
        let c = channel
            .parse()
            .with_context(|| format!("channel {s:?}: bad index"))?;
        Ok(ChannelSpec::Feature(id, c))
    }
}

pub fn parse_channels(list: &str) -> Result<Vec<ChannelSpec>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn channel_column(spec: ChannelSpec, trial: &Trial, seed: u64) -> Result<Tensor2D> {
    match spec {
        ChannelSpec::Feature(id, c) => {
            let x = trial
                .features
                .get(&id)
                .with_context(|| format!("trial {} has no path {id}", trial.meta.trial_id))?;
            if c >= x.cols() {
                bail!("channel {spec}: path {id} has only {} channels", x.cols());
            }
            Ok(Tensor2D::column(&x.channel(c)))
        }
        ChannelSpec::Noise => {
            let mut rng = Rng::derive(seed, &format!("noise-channel/{}", trial.meta.trial_id));
            let values: Vec<f64> = (0..trial.len()).map(|_| rng.normal(0.0, 1.0)).collect();
            Ok(Tensor2D::column(&values))
        }
    }
}

pub fn analyze(args: &AnalyzeArgs, exec: Execution) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let model = ck.to_model()?;
    let (_, trials) = load_trials(&args.manifest, ck.target_fps)?;
    ck.check_dims(&data_dims(&trials)?).with_context(|| {
        format!(
            "checkpoint {} does not fit this manifest",
            args.checkpoint.display()
        )
    })?;

    let model_paths = model.config().path_set();
    let paths = args.paths.clone().unwrap_or_else(|| model_paths.clone());
    for id in paths.iter() {
        if !model_paths.contains(id) {
            bail!("path {id} is not part of the checkpoint's model ({model_paths})");
        }
    }
    let channels = parse_channels(&args.channels)?;

    let traces = exec
        .map(&trials, |t| model.forward(&t.features))
        .into_iter()
        .collect::<skillpath_core::Result<Vec<_>>>()?;

    let trace_dir = args.out.join("traces");
    ensure_dir(&trace_dir)?;
    for (t, trace) in trials.iter().zip(&traces) {
        let mut w = create(&trace_dir.join(format!("{}.csv", t.meta.trial_id)))?;
        write_trace_csv(trace, &mut w)?;
        w.flush()?;
    }

    let mut csv = create(&args.out.join("correlation.csv"))?;
    writeln!(csv, "channel,R")?;
    for &spec in &channels {
        let columns = trials
            .iter()
            .map(|t| channel_column(spec, t, args.seed))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor2D> = columns.iter().collect();
        let r = correlation_analysis(&traces, &refs, 0, &paths)?;
        writeln!(csv, "{spec},{r}")?;
        println!("{spec}: R = {r:.4}");
    }
    csv.flush()?;

    let mut record = RunRecord::new("analyze", Some(ck.config_hash.clone()), args.seed)
        .input("checkpoint", &args.checkpoint)
        .input("manifest", &args.manifest);
    record.outputs = vec!["correlation.csv".into(), "traces/".into()];
    record.write(&args.out)
}
