use std::path::PathBuf;

use clap::{Args, ValueEnum};
use psyc_core::backend::{BackendConfig, RemoteConfig};
use psyc_core::RunConfig;

use crate::artifacts::require;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Remote,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values, which override defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Segments per interview.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Ablation such as `no-manual`; combine with `+`. Repeatable. `evaluate`
    /// adds one report row per value, other commands apply them to the config.
    #[arg(long, global = true)]
    pub ablate: Vec<String>,
    /// Output path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl GlobalArgs {
    /// Defaults, then the config file, then flags. `--ablate` is left to the caller.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                require(path)?;
                let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                toml::from_str(&raw).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        match (self.backend, &config.backend) {
            (Some(BackendKind::Mock), _) => config.backend = BackendConfig::Mock,
            (Some(BackendKind::Remote), BackendConfig::Mock) => config.backend = BackendConfig::Remote(RemoteConfig::default()),
            _ => {}
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(folds) = self.folds {
            config.n_folds = folds;
        }
        if let Some(runs) = self.runs {
            config.n_runs = runs;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn ablations(&self) -> Result<Vec<psyc_core::AblationFlags>, CliError> {
        self.ablate
            .iter()
            .map(|a| a.parse().map_err(|e| CliError::ConfigInvalid(format!("--ablate {a}: {e}"))))
            .collect()
    }
}

const HEADER: &str = "\
# psyc run configuration. Every key is optional; missing keys take the
# default shown here. Command-line flags override values in this file.
# Secrets never live here: the remote backend reads PSYC_API_KEY and
# PSYC_BASE_URL from the environment.
";

/// Comment placed above a key (`name`) or section (`[name]`).
fn doc(key: &str) -> Option<&'static str> {
    Some(match key {
        "k" => "Segments per interview; one classifier per segment.",
        "chunk_size" => "Words per retrieval chunk.",
        "chunk_overlap" => "Words shared by consecutive chunks; must be below chunk_size.",
        "top_k" => "Chunks retrieved per knowledge source and query.",
        "n_folds" => "Cross-validation folds, stratified by gender and diagnosis.",
        "n_runs" => "Repetitions of the cross-validation with seeds seed, seed+1, ...",
        "baseline_runs" => "Repetitions for the random and demographic baselines.",
        "seed" => "Base seed for folds, sampling and initialisation.",
        "few_shot_selection" => "Per class, the training interview with the \"shortest\" summary, or a \"random\" one.",
        "embed_batch" => "Texts per embedding request.",
        "workers" => "Threads issuing backend calls.",
        "[backend]" => "kind = \"mock\" (deterministic, offline) or \"remote\" (OpenAI-compatible HTTP).",
        "[flags]" => "Pipeline ingredients; setting one to false reproduces the matching ablation row.",
        "[train]" => "Aggregator fitting. model = \"weighted\" (one weight per segment) or \"logistic\".",
        "[synthetic]" => "Synthetic corpus layout, also used by the mock backend to read its signals.",
        _ => return None,
    })
}

/// The default configuration as TOML with every section documented.
pub fn template() -> String {
    let body = toml::to_string(&RunConfig::default()).expect("default config serialises");
    let mut out = String::from(HEADER);
    let mut section = String::new();
    for line in body.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = trimmed.to_string();
            if let Some(d) = doc(trimmed) {
                out.push_str(&format!("\n# {d}\n"));
            } else {
                out.push('\n');
            }
        } else if section.is_empty() {
            if let Some(d) = trimmed.split(" = ").next().and_then(doc) {
                out.push_str(&format!("# {d}\n"));
            }
        }
        if !trimmed.is_empty() {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_parses_back_to_defaults() {
        let parsed: RunConfig = toml::from_str(&template()).unwrap();
        assert_eq!(parsed, RunConfig::default());
        assert!(template().contains("# Segments per interview"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "k = 3\nseed = 5\n[flags]\nmanual = false\n").unwrap();
        let args = GlobalArgs {
            config: Some(path),
            seed: Some(9),
            ..GlobalArgs::default()
        };
        let c = args.load().unwrap();
        assert_eq!((c.k, c.seed, c.flags.manual, c.n_folds), (3, 9, false, 5));
    }

    #[test]
    fn bad_file_is_config_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "k = \"four\"\n").unwrap();
        let err = GlobalArgs {
            config: Some(path),
            ..GlobalArgs::default()
        }
        .load()
        .unwrap_err();
        assert_eq!(err.kind(), "ConfigInvalid");
        let zero = GlobalArgs {
            k: Some(0),
            ..GlobalArgs::default()
        };
        assert_eq!(zero.load().unwrap_err().kind(), "ConfigInvalid");
    }
}
