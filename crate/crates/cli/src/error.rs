use std::fmt;
use std::path::Path;

use psyc_core::pipeline::PipelineError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    ConfigInvalid(String),
    PathMissing(String),
    Locked(String),
    Io(String),
    Format(String),
    /// A failure inside the pipeline; `kind` names the component.
    Component { kind: &'static str, message: String },
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> CliError {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::PathMissing(_) => "PathMissing",
            CliError::Locked(_) => "Locked",
            CliError::Io(_) => "Io",
            CliError::Format(_) => "Format",
            CliError::Component { kind, .. } => kind,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::ConfigInvalid(_) | CliError::PathMissing(_) => 2,
            _ => 1,
        }
    }

    /// The single stderr line: `{"error":<kind>,"message":<text>}`.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m)
            | CliError::ConfigInvalid(m)
            | CliError::PathMissing(m)
            | CliError::Locked(m)
            | CliError::Io(m)
            | CliError::Format(m) => f.write_str(m),
            CliError::Component { message, .. } => f.write_str(message),
        }
    }
}

fn component(e: &PipelineError) -> &'static str {
    match e {
        PipelineError::Config(_) => "ConfigInvalid",
        PipelineError::Corpus(_) => "Corpus",
        PipelineError::Backend { .. } => "Backend",
        PipelineError::Retrieval(_) => "Retrieval",
        PipelineError::Prompt(_) => "Prompting",
        PipelineError::Ensemble(_) => "Ensemble",
        PipelineError::Eval(_) | PipelineError::MissingLabel { .. } => "Evaluation",
        PipelineError::MissingSummary(_) => "Pipeline",
        PipelineError::Leakage(_) => "Leakage",
        PipelineError::Context { source, .. } => component(source),
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> CliError {
        match e {
            PipelineError::Config(c) => CliError::ConfigInvalid(c.to_string()),
            e => CliError::Component {
                kind: component(&e),
                message: e.to_string(),
            },
        }
    }
}

macro_rules! via_pipeline {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> CliError {
                PipelineError::from(e).into()
            }
        }
    )*};
}

via_pipeline!(
    psyc_core::corpus::CorpusError,
    psyc_core::retrieval::RetrievalError,
    psyc_core::ensemble::EnsembleError,
    psyc_core::evaluation::EvalError,
    psyc_core::config::ConfigError
);
