//! Recognition of psychodynamic conflicts in long diagnostic-interview transcripts.
//!
//! The pipeline splits each interview into `k` word-balanced segments, summarises
//! them through a completion backend, asks one classifier per segment for a class
//! distribution (prompted with conflict context, one labelled example per class and
//! passages retrieved from a vector index), and fuses the per-segment distributions
//! with learned convex weights.
//!
//! Everything runs against [`backend::MockBackend`] and [`corpus::synth`] corpora
//! with no network access; [`backend::RemoteBackend`] talks to any
//! OpenAI-compatible endpoint.

pub mod ablation;
pub mod assets;
pub mod backend;
pub mod config;
pub mod corpus;
pub mod ensemble;
pub mod evaluation;
pub mod pipeline;
pub mod prompting;
pub mod retrieval;

mod text;

pub use ablation::AblationFlags;
pub use config::RunConfig;
pub use corpus::{ClassLabel, Conflict, Interview};
pub use ensemble::ClassDistribution;
