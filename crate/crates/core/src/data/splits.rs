use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrialMeta;
use crate::error::{Error, Result};
use crate::numcore::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SplitScheme {
    KFold(usize),
    /// Leave one user out.
    Louo,
}

impl FromStr for SplitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "louo" {
            return Ok(SplitScheme::Louo);
        }
        if let Some(k) = lower.strip_prefix("kfold:") {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Config(format!("bad fold count in '{s}'")))?;
            return Ok(SplitScheme::KFold(k));
        }
        Err(Error::Config(format!(
            "unknown split scheme '{s}' (expected kfold:K or louo)"
        )))
    }
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitScheme::KFold(k) => write!(f, "kfold:{k}"),
            SplitScheme::Louo => write!(f, "louo"),
        }
    }
}

impl TryFrom<String> for SplitScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SplitScheme> for String {
    fn from(s: SplitScheme) -> String {
        s.to_string()
    }
}

/// Assignment of every trial to one test fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub scheme: SplitScheme,
    pub seed: u64,
    pub n_folds: usize,
    pub assignments: BTreeMap<String, usize>,
}

impl SplitPlan {
    /// Trial ids whose test fold is `fold`, sorted.
    pub fn fold_members(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn fold_of(&self, trial_id: &str) -> Option<usize> {
        self.assignments.get(trial_id).copied()
    }

    /// Checks the plan assigns exactly the given trials.
    pub fn check_covers<'a>(&self, trial_ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let ids: BTreeSet<&str> = trial_ids.into_iter().collect();
        let planned: BTreeSet<&str> = self.assignments.keys().map(String::as_str).collect();
        if ids != planned {
            let missing: Vec<_> = ids.difference(&planned).take(3).collect();
            let extra: Vec<_> = planned.difference(&ids).take(3).collect();
            return Err(Error::Data(format!(
                "split plan does not match the manifest (unassigned: {missing:?}, unknown: {extra:?})"
            )));
        }
        if let Some((id, f)) = self.assignments.iter().find(|(_, &f)| f >= self.n_folds) {
            return Err(Error::Data(format!(
                "trial {id} assigned to fold {f} of {}",
                self.n_folds
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("plan serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Deterministic fold assignment.
///
/// K-fold shuffles the trial ids with the seed and deals them round-robin;
/// leave-one-user-out gives each distinct user (sorted) its own fold.
pub fn make_splits(trials: &[TrialMeta], scheme: SplitScheme, seed: u64) -> Result<SplitPlan> {
    let mut assignments = BTreeMap::new();
    let n_folds = match scheme {
        SplitScheme::KFold(k) => {
            if k < 2 {
                return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
            }
            if k > trials.len() {
                return Err(Error::Config(format!(
                    "{k} folds for {} trials",
                    trials.len()
                )));
            }
            let mut ids: Vec<&str> = trials.iter().map(|t| t.trial_id.as_str()).collect();
            ids.sort_unstable();
            Rng::derive(seed, "splits").shuffle(&mut ids);
            for (i, id) in ids.into_iter().enumerate() {
                assignments.insert(id.to_string(), i % k);
            }
            k
        }
        SplitScheme::Louo => {
            if let Some(t) = trials.iter().find(|t| t.user_id.is_empty()) {
                return Err(Error::Config(format!(
                    "trial {} has no user id",
                    t.trial_id
                )));
            }
            let users: BTreeSet<&str> = trials.iter().map(|t| t.user_id.as_str()).collect();
            if users.len() < 2 {
                return Err(Error::Config(
                    "leave-one-user-out needs at least two users".into(),
                ));
            }
            let index: BTreeMap<&str, usize> =
                users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
            for t in trials {
                assignments.insert(t.trial_id.clone(), index[t.user_id.as_str()]);
            }
            users.len()
        }
    };
    Ok(SplitPlan {
        scheme,
        seed,
        n_folds,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn metas(users: &[&str]) -> Vec<TrialMeta> {
        users
            .iter()
            .enumerate()
            .map(|(i, u)| TrialMeta {
                trial_id: format!("t{i:03}"),
                task_id: "x".into(),
                user_id: (*u).into(),
                grs: 10.0,
                grs_range: (6.0, 30.0),
            })
            .collect()
    }

    #[test]
    fn eight_trials_four_folds_of_two() {
        let plan = make_splits(&metas(&["a"; 8]), SplitScheme::KFold(4), 3).unwrap();
        for f in 0..4 {
            assert_eq!(plan.fold_members(f).len(), 2);
        }
    }

    #[test]
    fn louo_groups_users() {
        let plan = make_splits(&metas(&["a", "a", "b", "c"]), SplitScheme::Louo, 0).unwrap();
        assert_eq!(plan.n_folds, 3);
        let sizes: Vec<usize> = (0..3).map(|f| plan.fold_members(f).len()).collect();
        assert_eq!(sizes, vec![2, 1, 1]);
        assert_eq!(plan.fold_of("t000"), plan.fold_of("t001"));
    }

    #[test]
    fn same_seed_same_plan() {
        let m = metas(&["a"; 13]);
        assert_eq!(
            make_splits(&m, SplitScheme::KFold(3), 9).unwrap(),
            make_splits(&m, SplitScheme::KFold(3), 9).unwrap()
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            make_splits(&metas(&["a"; 3]), SplitScheme::KFold(4), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            make_splits(&metas(&["", "b"]), SplitScheme::Louo, 0),
            Err(Error::Config(_))
        ));
        assert!("kfold:x".parse::<SplitScheme>().is_err());
        assert_eq!(
            "kfold:4".parse::<SplitScheme>().unwrap(),
            SplitScheme::KFold(4)
        );
        assert_eq!("LOUO".parse::<SplitScheme>().unwrap(), SplitScheme::Louo);
    }

    proptest! {
        #[test]
        fn kfold_partitions_balanced(n in 2usize..60, k in 2usize..8, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let m = metas(&vec!["a"; n]);
            let plan = make_splits(&m, SplitScheme::KFold(k), seed).unwrap();
            plan.check_covers(m.iter().map(|t| t.trial_id.as_str())).unwrap();
            let sizes: Vec<usize> = (0..k).map(|f| plan.fold_members(f).len()).collect();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn louo_partitions_by_user(users in proptest::collection::vec(0u8..5, 2..40)) {
            let names: Vec<String> = users.iter().map(|u| format!("u{u}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let m = metas(&refs);
            let distinct: BTreeSet<_> = users.iter().collect();
            prop_assume!(distinct.len() >= 2);
            let plan = make_splits(&m, SplitScheme::Louo, 0).unwrap();
            plan.check_covers(m.iter().map(|t| t.trial_id.as_str())).unwrap();
            for t in &m {
                for o in &m {
                    let same_fold = plan.fold_of(&t.trial_id) == plan.fold_of(&o.trial_id);
                    prop_assert_eq!(same_fold, t.user_id == o.user_id);
                }
            }
        }
    }
}
