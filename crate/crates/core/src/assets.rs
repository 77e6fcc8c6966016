//! Editable prompt material: conflict context texts, manual excerpts for the
//! vector index, the summarisation style example and the instruction templates.
//!
//! A built-in set is compiled in; [`PromptAssets::load_dir`] overrides it from
//! a directory with the same layout as `crates/core/assets`:
//!
//! ```text
//! style_example.txt
//! summarise_instruction.txt
//! classify_instruction.txt      placeholders {theme} and {categories}
//! manual/<conflict-slug>.txt    context text for that conflict
//! manual/*.txt                  further excerpts, indexed only
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Conflict;

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} is empty")]
    Empty { file: String },
    #[error("{file} lacks the placeholder {placeholder}")]
    MissingPlaceholder { file: String, placeholder: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualExcerpt {
    /// File stem, e.g. `self-value` or `overview`.
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptAssets {
    pub style_example: String,
    pub summarise_instruction: String,
    pub classify_instruction: String,
    /// Sorted by id.
    pub manual: Vec<ManualExcerpt>,
}

const BUILTIN_MANUAL: [(&str, &str); 5] = [
    ("dominance-submission", include_str!("../assets/manual/dominance-submission.txt")),
    ("overview", include_str!("../assets/manual/overview.txt")),
    ("self-dependency", include_str!("../assets/manual/self-dependency.txt")),
    ("self-sufficiency", include_str!("../assets/manual/self-sufficiency.txt")),
    ("self-value", include_str!("../assets/manual/self-value.txt")),
];

pub const THEME_PLACEHOLDER: &str = "{theme}";
pub const CATEGORIES_PLACEHOLDER: &str = "{categories}";

impl PromptAssets {
    pub fn builtin() -> PromptAssets {
        PromptAssets {
            style_example: include_str!("../assets/style_example.txt").trim().to_string(),
            summarise_instruction: include_str!("../assets/summarise_instruction.txt").trim().to_string(),
            classify_instruction: include_str!("../assets/classify_instruction.txt").trim().to_string(),
            manual: BUILTIN_MANUAL
                .iter()
                .map(|(id, text)| ManualExcerpt {
                    id: id.to_string(),
                    text: text.trim().to_string(),
                })
                .collect(),
        }
    }

    /// Loads assets from `dir`. Files that are absent keep their built-in
    /// value; a present `manual/` directory replaces the built-in manual.
    pub fn load_dir(dir: &Path) -> Result<PromptAssets, AssetError> {
        let mut assets = PromptAssets::builtin();
        let read = |path: PathBuf| fs::read_to_string(&path).map_err(|source| AssetError::Io { path, source });
        for (name, slot) in [
            ("style_example.txt", &mut assets.style_example),
            ("summarise_instruction.txt", &mut assets.summarise_instruction),
            ("classify_instruction.txt", &mut assets.classify_instruction),
        ] {
            let path = dir.join(name);
            if path.is_file() {
                *slot = read(path)?.trim().to_string();
            }
        }
        let manual_dir = dir.join("manual");
        if manual_dir.is_dir() {
            let mut paths: Vec<PathBuf> = fs::read_dir(&manual_dir)
                .map_err(|source| AssetError::Io {
                    path: manual_dir.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            paths.sort();
            assets.manual = paths
                .into_iter()
                .map(|p| {
                    let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    Ok(ManualExcerpt {
                        id,
                        text: read(p)?.trim().to_string(),
                    })
                })
                .collect::<Result<_, AssetError>>()?;
        }
        assets.validate()?;
        Ok(assets)
    }

    pub fn validate(&self) -> Result<(), AssetError> {
        for (file, text) in [
            ("style_example.txt", &self.style_example),
            ("summarise_instruction.txt", &self.summarise_instruction),
            ("classify_instruction.txt", &self.classify_instruction),
        ] {
            if text.trim().is_empty() {
                return Err(AssetError::Empty { file: file.into() });
            }
        }
        for placeholder in [THEME_PLACEHOLDER, CATEGORIES_PLACEHOLDER] {
            if !self.classify_instruction.contains(placeholder) {
                return Err(AssetError::MissingPlaceholder {
                    file: "classify_instruction.txt".into(),
                    placeholder,
                });
            }
        }
        Ok(())
    }

    /// Context text for `conflict`: the manual excerpt named after its slug.
    pub fn context(&self, conflict: Conflict) -> Option<&str> {
        self.manual
            .iter()
            .find(|m| m.id == conflict.slug())
            .map(|m| m.text.as_str())
            .filter(|t| !t.trim().is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_is_complete() {
        let a = PromptAssets::builtin();
        a.validate().unwrap();
        for c in Conflict::ALL {
            assert!(a.context(c).is_some(), "{c}");
        }
        let ids: Vec<_> = a.manual.iter().map(|m| m.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("style_example.txt"), "Short example.\n").unwrap();
        fs::create_dir(dir.path().join("manual")).unwrap();
        fs::write(dir.path().join("manual/self-value.txt"), "Custom context.").unwrap();
        let a = PromptAssets::load_dir(dir.path()).unwrap();
        assert_eq!(a.style_example, "Short example.");
        assert_eq!(a.context(Conflict::SelfValue), Some("Custom context."));
        assert_eq!(a.context(Conflict::SelfDependency), None);
        assert_eq!(a.manual.len(), 1);
    }

    #[test]
    fn template_needs_placeholders() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("classify_instruction.txt"), "Rate {theme}.").unwrap();
        assert!(matches!(
            PromptAssets::load_dir(dir.path()),
            Err(AssetError::MissingPlaceholder { placeholder: "{categories}", .. })
        ));
    }
}
