use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, Stream};

/// How rows are dealt into cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Deal each class separately so folds keep the overall class ratio.
    pub stratified: bool,
}

impl Default for FoldPlan {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            stratified: false,
        }
    }
}

impl FoldPlan {
    /// Row indices of each held-out fold. Folds partition `0..n` and their
    /// sizes differ by at most one.
    pub fn assign(&self, d: &Dataset) -> Result<Vec<Vec<usize>>> {
        if self.k < 2 {
            return Err(Error::Spec(format!("k must be at least 2, got {}", self.k)));
        }
        if d.len() < self.k {
            return Err(Error::TooSmall(format!(
                "{} rows cannot fill {} folds",
                d.len(),
                self.k
            )));
        }
        let mut rng = seeded(self.seed, Stream::Folds);
        let order: Vec<usize> = if self.stratified {
            let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
                (0..d.len()).partition(|&i| d.records()[i].label());
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            pos.into_iter().chain(neg).collect()
        } else {
            let mut all: Vec<usize> = (0..d.len()).collect();
            all.shuffle(&mut rng);
            all
        };
        // Round-robin dealing keeps sizes within one and spreads each class
        // evenly when the order is class-grouped.
        let mut folds = vec![Vec::with_capacity(d.len() / self.k + 1); self.k];
        for (pos, idx) in order.into_iter().enumerate() {
            folds[pos % self.k].push(idx);
        }
        Ok(folds)
    }
}
