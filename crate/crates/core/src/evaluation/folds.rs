use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{Gender, Interview};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub assignment: BTreeMap<String, usize>,
    /// Stratification key per interview.
    pub strata: BTreeMap<String, (Gender, String)>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn test_ids(&self, fold: usize) -> BTreeSet<&str> {
        self.assignment
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn train_ids(&self, fold: usize) -> BTreeSet<&str> {
        self.assignment
            .iter()
            .filter(|(_, f)| **f != fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Folds stratified by (gender, diagnosis).
///
/// Each cell is shuffled with the seeded RNG; cells are then dealt, in key
/// order, onto folds by one round-robin counter that starts at a random fold.
/// A cell of size `m` therefore puts `⌊m/n⌋` or `⌈m/n⌉` members in every fold.
pub fn stratified_kfold(corpus: &[Interview], n_folds: usize, seed: u64) -> Result<FoldAssignment, EvalError> {
    if n_folds < 2 {
        return Err(EvalError::InvalidFoldCount(n_folds));
    }
    if corpus.len() < n_folds {
        return Err(EvalError::TooFewExamples {
            got: corpus.len(),
            n_folds,
        });
    }
    let mut cells: BTreeMap<(Gender, String), Vec<&str>> = BTreeMap::new();
    let mut strata = BTreeMap::new();
    for iv in corpus {
        let d = iv
            .demographics
            .as_ref()
            .ok_or_else(|| EvalError::MissingDemographics(iv.id.clone()))?;
        let key = (d.gender, d.diagnosis.clone());
        strata.insert(iv.id.clone(), key.clone());
        cells.entry(key).or_default().push(&iv.id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = rng.random_range(0..n_folds);
    let mut assignment = BTreeMap::new();
    for ids in cells.values_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            assignment.insert(id.to_string(), next);
            next = (next + 1) % n_folds;
        }
    }
    Ok(FoldAssignment {
        n_folds,
        assignment,
        strata,
    })
}
