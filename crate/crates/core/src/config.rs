use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ablation::AblationFlags;
use crate::backend::BackendConfig;
use crate::corpus::synth::SyntheticSpec;
use crate::ensemble::TrainConfig;

#[derive(Debug, Error, PartialEq)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FewShotSelection {
    /// Per class, the training interview with the shortest summary (ties by id).
    #[default]
    Shortest,
    /// Per class, a seeded random training interview.
    Random,
}

/// Everything that determines a run. Serialised into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub backend: BackendConfig,
    /// Segments (and segment models) per interview.
    pub k: usize,
    /// Chunk length in words.
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    /// Hits retrieved per knowledge source.
    pub top_k: usize,
    pub flags: AblationFlags,
    pub n_folds: usize,
    pub n_runs: usize,
    pub baseline_runs: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub few_shot_selection: FewShotSelection,
    /// Texts per embedding request.
    pub embed_batch: usize,
    /// Worker threads for backend calls.
    pub workers: usize,
    /// Signal layout used by `synth` and by the mock backend.
    pub synthetic: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendConfig::Mock,
            k: 4,
            chunk_size: 512,
            chunk_overlap: 64,
            top_k: 5,
            flags: AblationFlags::default(),
            n_folds: 5,
            n_runs: 100,
            baseline_runs: 1000,
            seed: 0,
            train: TrainConfig::default(),
            few_shot_selection: FewShotSelection::default(),
            embed_batch: 32,
            workers: 4,
            synthetic: SyntheticSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.chunk_size == 0 || self.chunk_overlap >= self.chunk_size {
            return fail(format!(
                "chunk_overlap ({}) must be smaller than chunk_size ({})",
                self.chunk_overlap, self.chunk_size
            ));
        }
        if self.top_k == 0 {
            return fail("top_k must be at least 1".into());
        }
        if self.n_folds < 2 {
            return fail("n_folds must be at least 2".into());
        }
        if self.n_runs == 0 || self.baseline_runs == 0 {
            return fail("n_runs and baseline_runs must be at least 1".into());
        }
        if self.workers == 0 || self.embed_batch == 0 {
            return fail("workers and embed_batch must be at least 1".into());
        }
        if !self.train.learning_rate.is_finite() || self.train.learning_rate <= 0.0 || self.train.max_iterations == 0 || self.train.l2 < 0.0 {
            return fail("train needs a positive learning_rate, max_iterations >= 1 and l2 >= 0".into());
        }
        self.synthetic
            .validate()
            .map_err(|e| ConfigError(format!("synthetic: {e}")))?;
        Ok(())
    }
}
