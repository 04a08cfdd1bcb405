//! Trial manifests.
//!
//! A manifest is a JSON document listing trials and the sequence file that
//! holds each path's features. File paths are relative to the manifest's
//! directory:
//!
//! ```json
//! {
//!   "version": 1,
//!   "trials": [
//!     {
//!       "trial_id": "trial_000",
//!       "task_id": "sim",
//!       "user_id": "user_03",
//!       "grs": 17.5,
//!       "grs_range": [6.0, 30.0],
//!       "fps": 5.0,
//!       "paths": { "V": "seq/trial_000_V.umsa", "P": "seq/trial_000_P.umsa" }
//!     }
//!   ]
//! }
//! ```
//!
//! `fps` is optional; when present and a target rate is requested, sequences
//! are decimated on load.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{normalize_grs, read_sequence, resample};
use crate::error::{Error, Result};
use crate::model::{PathFeatures, PathId};

pub const MANIFEST_VERSION: u32 = 1;

/// Identity and annotation of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub trial_id: String,
    pub task_id: String,
    pub user_id: String,
    pub grs: f64,
    pub grs_range: (f64, f64),
}

impl TrialMeta {
    pub fn validate(&self) -> Result<()> {
        normalize_grs(self.grs, self.grs_range).map(|_| ())
    }

    /// Normalized rating in `[0, 1]`.
    pub fn target(&self) -> Result<f64> {
        normalize_grs(self.grs, self.grs_range)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(flatten)]
    pub meta: TrialMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    pub paths: BTreeMap<PathId, String>,
}

/// A trial with its feature sequences in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub meta: TrialMeta,
    pub features: PathFeatures,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.features.values().next().map_or(0, |x| x.rows())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target(&self) -> Result<f64> {
        self.meta.target()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub trials: Vec<TrialRecord>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(trials: Vec<TrialRecord>, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            trials,
            base_dir: base_dir.into(),
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Checks ids are unique and ratings lie in their ranges.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Data(format!(
                "unsupported manifest version {}",
                self.version
            )));
        }
        let mut seen = BTreeSet::new();
        for t in &self.trials {
            if !seen.insert(t.meta.trial_id.as_str()) {
                return Err(Error::Data(format!(
                    "duplicate trial id {}",
                    t.meta.trial_id
                )));
            }
            t.meta
                .validate()
                .map_err(|e| Error::Data(format!("trial {}: {e}", t.meta.trial_id)))?;
            if t.paths.is_empty() {
                return Err(Error::Data(format!(
                    "trial {} lists no sequences",
                    t.meta.trial_id
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn trial_ids(&self) -> Vec<&str> {
        self.trials
            .iter()
            .map(|t| t.meta.trial_id.as_str())
            .collect()
    }

    /// Reads every referenced sequence, optionally decimating to `target_fps`.
    ///
    /// All sequences of a trial must share one length after resampling.
    pub fn load_trials(&self, target_fps: Option<f64>) -> Result<Vec<Trial>> {
        self.trials
            .iter()
            .map(|r| self.load_trial(r, target_fps))
            .collect()
    }

    fn load_trial(&self, record: &TrialRecord, target_fps: Option<f64>) -> Result<Trial> {
        let mut features = BTreeMap::new();
        let mut len = None;
        for (&id, rel) in &record.paths {
            let path = self.base_dir.join(rel);
            let mut x = read_sequence(&path)?;
            if let (Some(src), Some(dst)) = (record.fps, target_fps) {
                x = resample(&x, src, dst)?;
            }
            match len {
                None => len = Some(x.rows()),
                Some(l) if l != x.rows() => {
                    return Err(Error::Data(format!(
                        "trial {}: path {id} has {} steps, expected {l}",
                        record.meta.trial_id,
                        x.rows()
                    )))
                }
                _ => {}
            }
            features.insert(id, x);
        }
        Ok(Trial {
            meta: record.meta.clone(),
            features,
        })
    }
}
