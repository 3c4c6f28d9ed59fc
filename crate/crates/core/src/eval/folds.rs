use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold id of every record, by record index.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }
}

/// Shuffles each class (in sorted label order) with one seeded stream, then
/// deals records to folds round-robin with a counter that carries over from
/// class to class. Fold sizes and per-class fold counts each differ by at
/// most one.
pub fn stratified_kfold(data: &LabeledDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config("k must be >= 2"));
    }
    if k > data.len() {
        return Err(Error::InvalidFoldCount { k, records: data.len() });
    }
    let mut rng = stream_rng(seed, 0);
    let mut assignments = vec![0; data.len()];
    let mut counter = 0;
    for label in data.labels() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| &data.records()[i].label == label).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}
