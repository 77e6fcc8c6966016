use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::confidence_interval;
use crate::ablation::AblationFlags;
use crate::config::RunConfig;
use crate::corpus::Conflict;
use crate::ensemble::Prediction;
use crate::retrieval::KnowledgeSource;

pub const REPORT_FORMAT: &str = "psyc-eval-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    /// 95% half-width; 0 when fewer than two scores exist.
    pub ci_half_width: f64,
    pub scores: Vec<f64>,
}

impl ScoreSummary {
    pub fn from_scores(scores: Vec<f64>) -> ScoreSummary {
        let (mean, ci_half_width) = confidence_interval(&scores, 0.95).unwrap_or_else(|_| {
            let mean = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
            (mean, 0.0)
        });
        ScoreSummary {
            mean,
            ci_half_width,
            scores,
        }
    }

    fn cell(&self) -> String {
        format!("{:.3} ± {:.3}", self.mean, self.ci_half_width)
    }
}

/// What the confidence intervals are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiBasis {
    /// Per-run means (fold scores averaged within a run); used when n_runs ≥ 2.
    RunMeans,
    /// Individual fold scores of the single run.
    FoldScores,
}

impl CiBasis {
    pub fn for_runs(n_runs: usize) -> CiBasis {
        if n_runs >= 2 {
            CiBasis::RunMeans
        } else {
            CiBasis::FoldScores
        }
    }

    /// Scores the interval is built from, given fold scores per run.
    pub fn basis(self, fold_scores: &[Vec<f64>]) -> Vec<f64> {
        match self {
            CiBasis::RunMeans => fold_scores
                .iter()
                .map(|f| f.iter().sum::<f64>() / f.len() as f64)
                .collect(),
            CiBasis::FoldScores => fold_scores.iter().flatten().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictResult {
    pub score: ScoreSummary,
    /// Weighted F1 per fold, one vector per run.
    pub fold_scores: Vec<Vec<f64>>,
    /// Each segment model scored on its own, by segment index.
    pub per_segment: Vec<ScoreSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub flags: AblationFlags,
    pub conflicts: BTreeMap<Conflict, ConflictResult>,
    /// Mean single-segment score over conflicts, by segment index.
    pub segment_average: Vec<f64>,
    /// Replies parsed as a bare label rather than a JSON distribution.
    pub bare_label_replies: usize,
    /// (fold, conflict) pairs whose training fold lacked a class, so the
    /// prompt went without few-shot examples.
    pub few_shot_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub name: String,
    pub conflicts: BTreeMap<Conflict, ScoreSummary>,
}

/// Which data each fold's labelled components were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub row: String,
    pub run: usize,
    pub fold: usize,
    pub test_ids: BTreeSet<String>,
    /// `(source, origin)` pairs in the shared fold index.
    pub index_origins: BTreeSet<(KnowledgeSource, String)>,
    pub few_shot_ids: BTreeMap<Conflict, BTreeSet<String>>,
    pub aggregator_training_ids: BTreeMap<Conflict, BTreeSet<String>>,
}

impl FoldAudit {
    /// Names every test-fold interview that reached a labelled component.
    pub fn leaks(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (source, origin) in &self.index_origins {
            if *source != KnowledgeSource::ManualExcerpt && self.test_ids.contains(origin) {
                out.push(format!("{origin} in fold index as {source}"));
            }
        }
        for (what, sets) in [("few-shot pool", &self.few_shot_ids), ("aggregator training", &self.aggregator_training_ids)] {
            for (conflict, ids) in sets {
                for id in ids.intersection(&self.test_ids) {
                    out.push(format!("{id} in {what} for {conflict}"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceAudit {
    /// Number of (row, run, fold) combinations checked.
    pub folds_checked: usize,
    /// Full records for the first run of every row.
    pub records: Vec<FoldAudit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub version: u32,
    pub config: RunConfig,
    pub ci_basis: CiBasis,
    pub rows: Vec<ReportRow>,
    pub baselines: Vec<BaselineRow>,
    pub audit: ProvenanceAudit,
    /// Test-fold predictions of the first row's first run.
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Configurations and baselines by conflict, then the per-segment
    /// breakdown of the first row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let name_width = self
            .rows
            .iter()
            .map(|r| r.name.chars().count())
            .chain(self.baselines.iter().map(|b| b.name.chars().count()))
            .chain([13])
            .max()
            .unwrap_or(13);
        let _ = write!(out, "{:<name_width$}", "Configuration");
        for c in Conflict::ALL {
            let _ = write!(out, "  {:>13}", c.short_name());
        }
        out.push('\n');
        let cell = |s: Option<&ScoreSummary>| s.map_or_else(|| "-".to_string(), ScoreSummary::cell);
        for row in &self.rows {
            let _ = write!(out, "{:<name_width$}", row.name);
            for c in Conflict::ALL {
                let _ = write!(out, "  {:>13}", cell(row.conflicts.get(&c).map(|r| &r.score)));
            }
            out.push('\n');
        }
        for b in &self.baselines {
            let _ = write!(out, "{:<name_width$}", b.name);
            for c in Conflict::ALL {
                let _ = write!(out, "  {:>13}", cell(b.conflicts.get(&c)));
            }
            out.push('\n');
        }
        if let Some(row) = self.rows.first().filter(|r| r.flags.ensemble) {
            let _ = writeln!(out, "\nSingle segment models ({})", row.name);
            let _ = write!(out, "{:<10}", "Segment");
            for c in Conflict::ALL {
                let _ = write!(out, "  {:>10}", c.short_name());
            }
            let _ = writeln!(out, "  {:>10}", "Mean");
            for (i, avg) in row.segment_average.iter().enumerate() {
                let _ = write!(out, "{:<10}", i + 1);
                for c in Conflict::ALL {
                    let v = row.conflicts.get(&c).and_then(|r| r.per_segment.get(i)).map(|s| s.mean);
                    let _ = write!(out, "  {:>10}", v.map_or("-".into(), |v| format!("{v:.3}")));
                }
                let _ = writeln!(out, "  {avg:>10.3}");
            }
        }
        let basis = match self.ci_basis {
            CiBasis::RunMeans => "run means",
            CiBasis::FoldScores => "fold scores",
        };
        let _ = writeln!(
            out,
            "\nWeighted F1, mean ± 95% CI over {basis}; {} runs × {} folds.",
            self.config.n_runs, self.config.n_folds
        );
        out
    }
}
