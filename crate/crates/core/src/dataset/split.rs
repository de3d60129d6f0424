use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, DetectionRecord, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// View-level k-fold assignment, stratified per instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub fold_count: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
    /// Instances with fewer views than folds; all their views are train-only.
    pub train_only_instances: Vec<String>,
}

impl SplitAssignment {
    pub fn partition(&self, fold: usize, record_id: &str) -> Option<Partition> {
        let f = self.folds.get(fold)?;
        if f.test.iter().any(|r| r == record_id) {
            Some(Partition::Test)
        } else if f.train.iter().any(|r| r == record_id) {
            Some(Partition::Train)
        } else {
            None
        }
    }
}

/// Distributes each instance's views round-robin over the folds after a
/// seeded shuffle, so every instance with at least `folds` views has test
/// views in every fold and train views in every fold.
pub fn make_splits(records: &[DetectionRecord], folds: usize, seed: u64) -> Result<SplitAssignment> {
    if records.is_empty() {
        return Err(DatasetError::EmptySplit);
    }
    if folds < 2 {
        return Err(DatasetError::FoldCount(folds));
    }

    let mut by_instance: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        by_instance
            .entry(&r.instance_id)
            .or_default()
            .push(&r.record_id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_fold: BTreeMap<&str, Option<usize>> = BTreeMap::new();
    let mut train_only = Vec::new();
    for (instance, views) in by_instance.iter_mut() {
        views.sort_unstable();
        if views.len() < folds {
            train_only.push(instance.to_string());
            for v in views.iter() {
                test_fold.insert(v, None);
            }
            continue;
        }
        views.shuffle(&mut rng);
        for (pos, v) in views.iter().enumerate() {
            test_fold.insert(v, Some(pos % folds));
        }
    }

    let folds_out = (0..folds)
        .map(|k| {
            let mut fold = Fold {
                train: Vec::new(),
                test: Vec::new(),
            };
            for r in records {
                match test_fold[r.record_id.as_str()] {
                    Some(t) if t == k => fold.test.push(r.record_id.clone()),
                    _ => fold.train.push(r.record_id.clone()),
                }
            }
            fold
        })
        .collect();

    Ok(SplitAssignment {
        fold_count: folds,
        seed,
        folds: folds_out,
        train_only_instances: train_only,
    })
}
