use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;
use crate::corpus::{ClassLabel, NUM_CLASSES};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

/// `m[t][p]` counts items of true class `t` predicted as `p`.
pub fn confusion_matrix(preds: &[ClassLabel], truth: &[ClassLabel]) -> [[usize; NUM_CLASSES]; NUM_CLASSES] {
    let mut m = [[0; NUM_CLASSES]; NUM_CLASSES];
    for (p, t) in preds.iter().zip(truth) {
        m[t.index()][p.index()] += 1;
    }
    m
}

/// Support-weighted mean of per-class F1; a class with zero precision and
/// recall scores 0.
pub fn weighted_f1(preds: &[ClassLabel], truth: &[ClassLabel]) -> Result<f64, EvalError> {
    if preds.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let m = confusion_matrix(preds, truth);
    let n = truth.len() as f64;
    let mut total = 0.0;
    for c in 0..NUM_CLASSES {
        let tp = m[c][c] as f64;
        let support: usize = m[c].iter().sum();
        let predicted: usize = (0..NUM_CLASSES).map(|t| m[t][c]).sum();
        if support == 0 || tp == 0.0 {
            continue;
        }
        let precision = tp / predicted as f64;
        let recall = tp / support as f64;
        let f1 = 2.0 * precision * recall / (precision + recall);
        total += support as f64 / n * f1;
    }
    Ok(total)
}

/// Mean and normal-approximation half-width `z·s/√n`, `s` the sample
/// standard deviation. For `level = 0.95`, `z` is [`Z_95`].
pub fn confidence_interval(scores: &[f64], level: f64) -> Result<(f64, f64), EvalError> {
    if scores.len() < 2 {
        return Err(EvalError::TooFewScores(scores.len()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::InvalidLevel(level));
    }
    let z = if (level - 0.95).abs() < 1e-12 {
        Z_95
    } else {
        Normal::standard().inverse_cdf(0.5 + level / 2.0)
    };
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, z * var.sqrt() / n.sqrt()))
}
