use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub trial_id: String,
    pub task_id: String,
    /// Normalized ground truth.
    pub y: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub predictions: Vec<Prediction>,
    /// SROCC within the fold; `None` with fewer than two test trials.
    pub srocc: Option<f64>,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub n: usize,
    pub srocc: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub per_task: BTreeMap<String, TaskScore>,
    /// Fisher z average of the per-task correlations.
    pub overall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub paths: String,
    pub scheme: String,
    pub runs: Vec<RunReport>,
    pub mean_overall: f64,
    pub std_overall: f64,
    pub per_task_mean: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Every per-task correlation across runs.
    pub fn task_sroccs(&self) -> impl Iterator<Item = f64> + '_ {
        self.runs
            .iter()
            .flat_map(|r| r.per_task.values().map(|t| t.srocc))
    }
}

/// `trial_id,y,q` rows for one fold.
pub fn write_predictions_csv<W: Write>(fold: &FoldReport, mut out: W) -> io::Result<()> {
    writeln!(out, "trial_id,y,q")?;
    for p in &fold.predictions {
        writeln!(out, "{},{},{}", p.trial_id, p.y, p.q)?;
    }
    Ok(())
}
