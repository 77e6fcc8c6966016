use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Pipeline ingredients that can be switched off. All on is the full system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    /// Manual excerpts in the vector index.
    pub manual: bool,
    /// Training-fold transcripts (unlabelled) in the vector index.
    pub train_interviews_in_vdb: bool,
    /// The subject's own transcript in the vector index.
    pub test_interview_in_vdb: bool,
    /// The subject's summary as a prompt section.
    pub subject_summary: bool,
    pub few_shot: bool,
    /// Learned weights; off means uniform weights.
    pub weighted_voting: bool,
    /// One model per segment; off means one model over the full summary.
    pub ensemble: bool,
    /// Route each segment to its specialised model tag; off uses the base tag.
    pub fine_tuned_tags: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags {
            manual: true,
            train_interviews_in_vdb: true,
            test_interview_in_vdb: true,
            subject_summary: true,
            few_shot: true,
            weighted_voting: true,
            ensemble: true,
            fine_tuned_tags: true,
        }
    }
}

struct Ablation {
    cli: &'static str,
    row: &'static str,
    get: fn(&mut AblationFlags) -> &mut bool,
}

const ABLATIONS: [Ablation; 8] = [
    Ablation { cli: "no-manual", row: "w/o Manual", get: |f| &mut f.manual },
    Ablation { cli: "no-train-vdb", row: "w/o Train Interv. in VDB", get: |f| &mut f.train_interviews_in_vdb },
    Ablation { cli: "no-test-vdb", row: "w/o Test Interv. in VDB", get: |f| &mut f.test_interview_in_vdb },
    Ablation { cli: "no-summary", row: "w/o Test Interv. Summary", get: |f| &mut f.subject_summary },
    Ablation { cli: "no-few-shot", row: "w/o Few-shot Examples", get: |f| &mut f.few_shot },
    Ablation { cli: "no-weighted-voting", row: "w/o Weighted Voting", get: |f| &mut f.weighted_voting },
    Ablation { cli: "no-ensemble", row: "w/o Ensemble", get: |f| &mut f.ensemble },
    Ablation { cli: "no-fine-tuning", row: "w/o Fine-tuning", get: |f| &mut f.fine_tuned_tags },
];

pub const FULL_ROW: &str = "Full";

impl AblationFlags {
    pub fn full() -> AblationFlags {
        AblationFlags::default()
    }

    /// CLI names accepted by [`FromStr`], in row order.
    pub fn names() -> impl Iterator<Item = &'static str> {
        ABLATIONS.iter().map(|a| a.cli)
    }

    /// Report row label, e.g. `Full`, `w/o Manual` or `w/o Manual & w/o Few-shot Examples`.
    pub fn row_name(&self) -> String {
        let mut copy = *self;
        let off: Vec<&str> = ABLATIONS.iter().filter(|a| !*(a.get)(&mut copy)).map(|a| a.row).collect();
        if off.is_empty() {
            FULL_ROW.to_string()
        } else {
            off.join(" & ")
        }
    }

    /// CLI spelling, e.g. `full` or `no-manual+no-few-shot`.
    pub fn cli_name(&self) -> String {
        let mut copy = *self;
        let off: Vec<&str> = ABLATIONS.iter().filter(|a| !*(a.get)(&mut copy)).map(|a| a.cli).collect();
        if off.is_empty() {
            "full".to_string()
        } else {
            off.join("+")
        }
    }
}

impl fmt::Display for AblationFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.row_name())
    }
}

impl FromStr for AblationFlags {
    type Err = String;

    /// Parses `full` or `+`-joined ablation names such as `no-manual+no-few-shot`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut flags = AblationFlags::default();
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(flags);
        }
        for part in s.split('+').map(str::trim) {
            let ablation = ABLATIONS
                .iter()
                .find(|a| a.cli.eq_ignore_ascii_case(part))
                .ok_or_else(|| {
                    format!(
                        "unknown ablation `{part}`; expected one of {}",
                        AblationFlags::names().collect::<Vec<_>>().join(", ")
                    )
                })?;
            *(ablation.get)(&mut flags) = false;
        }
        Ok(flags)
    }
}
