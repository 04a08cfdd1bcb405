//! Rank correlation, Fisher z averaging, cross-validation and the
//! output/input correlation analysis.

mod analysis;
mod cv;
mod rank;
mod report;

pub use analysis::correlation_analysis;
pub use cv::{cross_validate, run_seed, score_predictions, Learner, ModelLearner};
pub use rank::{average_ranks, fisher_z_average, srocc, Srocc, FISHER_CLAMP};
pub use report::{write_predictions_csv, EvalReport, FoldReport, Prediction, RunReport, TaskScore};
