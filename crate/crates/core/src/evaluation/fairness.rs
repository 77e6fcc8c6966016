//! Conditional demographic disparity, one class at a time.
//!
//! For class `c` and true-label stratum `y`, `Δ_y` is the mean predicted
//! probability of `c` among male subjects minus that among female subjects.
//! `CDD_c = Σ_y (n_y / N) Δ_y`, summed over strata that contain both groups,
//! with `N` the number of examples in those strata.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{ClassLabel, Conflict, Gender, NUM_CLASSES};
use crate::ensemble::ClassDistribution;

pub const GROUP_DEFINITION: &str = "male minus female";

#[derive(Debug, Clone, PartialEq)]
pub struct CddExample {
    pub group: Gender,
    pub truth: ClassLabel,
    pub distribution: ClassDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumCount {
    pub truth: ClassLabel,
    pub male: usize,
    pub female: usize,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictCdd {
    /// One value per class, canonical order.
    pub per_class: [f64; NUM_CLASSES],
    pub strata: Vec<StratumCount>,
}

impl ConflictCdd {
    pub fn excluded(&self) -> impl Iterator<Item = ClassLabel> + '_ {
        self.strata.iter().filter(|s| !s.included).map(|s| s.truth)
    }
}

pub fn cdd(examples: &[CddExample]) -> Result<ConflictCdd, EvalError> {
    let mut strata: BTreeMap<ClassLabel, [Vec<&ClassDistribution>; 2]> = BTreeMap::new();
    for e in examples {
        let slot = usize::from(e.group == Gender::Female);
        strata.entry(e.truth).or_default()[slot].push(&e.distribution);
    }
    let n_total: usize = strata
        .values()
        .filter(|[m, f]| !m.is_empty() && !f.is_empty())
        .map(|[m, f]| m.len() + f.len())
        .sum();
    if n_total == 0 {
        return Err(EvalError::SingleGroupOnly);
    }
    let mean = |ds: &[&ClassDistribution], c: usize| ds.iter().map(|d| d.probs()[c]).sum::<f64>() / ds.len() as f64;
    let mut per_class = [0.0; NUM_CLASSES];
    let mut counts = Vec::new();
    for (&truth, [male, female]) in &strata {
        let included = !male.is_empty() && !female.is_empty();
        counts.push(StratumCount {
            truth,
            male: male.len(),
            female: female.len(),
            included,
        });
        if !included {
            continue;
        }
        let weight = (male.len() + female.len()) as f64 / n_total as f64;
        for (c, v) in per_class.iter_mut().enumerate() {
            *v += weight * (mean(male, c) - mean(female, c));
        }
    }
    Ok(ConflictCdd {
        per_class,
        strata: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub group_definition: String,
    pub per_conflict: BTreeMap<Conflict, ConflictCdd>,
}

impl FairnessReport {
    /// Rows are classes, columns conflicts.
    pub fn render_table(&self) -> String {
        let conflicts: Vec<Conflict> = self.per_conflict.keys().copied().collect();
        let mut out = String::new();
        let _ = write!(out, "{:<24}", "CDD (male - female)");
        for c in &conflicts {
            let _ = write!(out, " {:>11}", c.short_name());
        }
        out.push('\n');
        for class in ClassLabel::ALL {
            let _ = write!(out, "{:<24}", class.name());
            for c in &conflicts {
                let v = self.per_conflict[c].per_class[class.index()];
                // Rounding noise would otherwise print as -0.0000.
                let v = if v.abs() < 5e-5 { 0.0 } else { v };
                let _ = write!(out, " {v:>11.4}");
            }
            out.push('\n');
        }
        for c in &conflicts {
            let excluded: Vec<&str> = self.per_conflict[c].excluded().map(|l| l.name()).collect();
            if !excluded.is_empty() {
                let _ = writeln!(out, "note: {} excludes single-group strata: {}", c.slug(), excluded.join(", "));
            }
        }
        out
    }
}
