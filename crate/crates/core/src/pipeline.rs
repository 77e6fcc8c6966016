//! End-to-end orchestration: summarise, index, classify, fuse, score.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ablation::AblationFlags;
use crate::assets::PromptAssets;
use crate::backend::{BackendError, Completer, CompletionRequest, Embedder, EmbeddingVector};
use crate::config::{ConfigError, FewShotSelection, RunConfig};
use crate::corpus::{segment, ClassLabel, Conflict, CorpusError, Demographics, Interview, NUM_CLASSES};
use crate::ensemble::{
    aggregate, classify_segment, train_aggregator, AggregatorWeights, EnsembleError, Prediction, SegmentInput,
    SegmentPrediction, WeightsFile,
};
use crate::evaluation::{
    demographic_baseline, random_baseline, stratified_kfold, weighted_f1, BaselineRow, CiBasis, ConflictResult,
    EvalError, EvalReport, FoldAssignment, FoldAudit, MlpConfig, ProvenanceAudit, ReportRow, ScoreSummary,
    REPORT_FORMAT, REPORT_VERSION,
};
use crate::prompting::{build_summary_prompt_with, FewShotExample, ParseMode, PromptError};
use crate::retrieval::{
    chunk_document, embed_chunks, KnowledgeChunk, KnowledgeSource, QueryFilter, RetrievalError, RetrievalHit,
    VectorIndex,
};

pub const SUMMARISER_TAG: &str = "summariser";
pub const BASE_TAG: &str = "base";
pub const FULL_TAG: &str = "full";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{context}: {source}")]
    Backend {
        context: String,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("interview {id} has no label for {conflict}")]
    MissingLabel { id: String, conflict: Conflict },
    #[error("no summaries for interview {0}")]
    MissingSummary(String),
    #[error("test data reached a labelled component: {0}")]
    Leakage(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    fn within(self, context: impl Into<String>) -> PipelineError {
        PipelineError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Maps `f` over `items` on up to `workers` threads, preserving order.
/// Stops handing out work after the first error.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(items.len()) {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) > 0 {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                if r.is_err() {
                    failed.fetch_add(1, Ordering::Relaxed);
                }
                results.lock().expect("results poisoned")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("results poisoned");
    // Report the earliest error by position so failures are deterministic.
    let mut out = Vec::with_capacity(items.len());
    for r in results {
        match r {
            Some(Ok(v)) => out.push(v),
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    Ok(out)
}

/// Per-segment summaries of one interview.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewSummaries {
    pub interview_id: String,
    pub segments: Vec<String>,
}

impl InterviewSummaries {
    /// The whole-interview summary: segment summaries in order.
    pub fn full(&self) -> String {
        self.segments.join("\n")
    }
}

#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub completer: &'a dyn Completer,
    pub embedder: &'a dyn Embedder,
}

/// One classifier input unit: a segment summary (ensemble) or the full summary.
struct Unit {
    index: usize,
    summary: String,
    model_tag: String,
    query: EmbeddingVector,
}

/// Model tag for segment `index` under `flags`.
pub fn model_tag(flags: &AblationFlags, index: usize) -> String {
    match (flags.ensemble, flags.fine_tuned_tags) {
        (true, true) => format!("segment-{index}"),
        (false, true) => FULL_TAG.to_string(),
        (_, false) => BASE_TAG.to_string(),
    }
}

/// Summaries, chunk embeddings and query vectors shared by every row, run and fold.
pub struct Prepared {
    pub summaries: BTreeMap<String, InterviewSummaries>,
    /// Every interview's chunks, tagged as training-interview chunks.
    interview_chunks: BTreeMap<String, Vec<KnowledgeChunk>>,
    manual_chunks: Vec<KnowledgeChunk>,
    /// Every interview's chunks as test-interview chunks; queried per subject.
    subject_index: VectorIndex,
    segment_queries: BTreeMap<String, Vec<EmbeddingVector>>,
    full_queries: BTreeMap<String, EmbeddingVector>,
}

pub struct Pipeline<'a> {
    pub backends: Backends<'a>,
    pub assets: &'a PromptAssets,
    pub config: &'a RunConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(backends: Backends<'a>, assets: &'a PromptAssets, config: &'a RunConfig) -> Result<Pipeline<'a>> {
        config.validate()?;
        Ok(Pipeline {
            backends,
            assets,
            config,
        })
    }

    pub fn summarise_text(&self, text: &str) -> Result<String> {
        let bundle = build_summary_prompt_with(text, &self.assets.style_example, &self.assets.summarise_instruction)?;
        self.backends
            .completer
            .complete(&CompletionRequest::new(bundle.render(), SUMMARISER_TAG))
            .map_err(|source| PipelineError::Backend {
                context: "summarise".into(),
                source,
            })
    }

    pub fn summarise_interview(&self, interview: &Interview) -> Result<InterviewSummaries> {
        let segments = segment(interview, self.config.k)?;
        let summaries = segments
            .iter()
            .map(|s| {
                self.summarise_text(&s.text)
                    .map_err(|e| e.within(format!("{} segment {}", interview.id, s.index)))
            })
            .collect::<Result<_>>()?;
        Ok(InterviewSummaries {
            interview_id: interview.id.clone(),
            segments: summaries,
        })
    }

    pub fn summarise_corpus(&self, corpus: &[Interview]) -> Result<BTreeMap<String, InterviewSummaries>> {
        let all = parallel_map(corpus, self.config.workers, |iv| self.summarise_interview(iv))?;
        Ok(all.into_iter().map(|s| (s.interview_id.clone(), s)).collect())
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        self.backends
            .embedder
            .embed(&[text])
            .map_err(|source| PipelineError::Backend {
                context: "embed query".into(),
                source,
            })?
            .pop()
            .ok_or_else(|| PipelineError::Backend {
                context: "embed query".into(),
                source: BackendError::MalformedResponse("no vector returned".into()),
            })
    }

    pub fn chunk_and_embed(&self, source: KnowledgeSource, doc_id: &str, text: &str) -> Result<Vec<KnowledgeChunk>> {
        let drafts = chunk_document(source, doc_id, text, self.config.chunk_size, self.config.chunk_overlap)?;
        Ok(embed_chunks(drafts, self.backends.embedder, self.config.embed_batch)?)
    }

    pub fn manual_chunks(&self) -> Result<Vec<KnowledgeChunk>> {
        let mut out = Vec::new();
        for m in &self.assets.manual {
            out.extend(self.chunk_and_embed(KnowledgeSource::ManualExcerpt, &m.id, &m.text)?);
        }
        Ok(out)
    }

    /// Computes everything that does not depend on the fold split.
    pub fn prepare(&self, corpus: &[Interview], summaries: Option<BTreeMap<String, InterviewSummaries>>) -> Result<Prepared> {
        let summaries = match summaries {
            Some(s) => {
                if let Some(bad) = s.values().find(|x| x.segments.len() != self.config.k) {
                    return Err(ConfigError(format!(
                        "summaries for {} have {} segments but k = {}",
                        bad.interview_id,
                        bad.segments.len(),
                        self.config.k
                    ))
                    .into());
                }
                s
            }
            None => self.summarise_corpus(corpus)?,
        };
        let mut interview_chunks = BTreeMap::new();
        let mut subject_index = VectorIndex::new();
        let embedded = parallel_map(corpus, self.config.workers, |iv| {
            self.chunk_and_embed(KnowledgeSource::TrainingInterview, &iv.id, &iv.full_text())
        })?;
        for (iv, chunks) in corpus.iter().zip(embedded) {
            subject_index.add(chunks.iter().map(|c| as_source(c, KnowledgeSource::TestInterview)).collect())?;
            interview_chunks.insert(iv.id.clone(), chunks);
        }
        let mut segment_queries = BTreeMap::new();
        let mut full_queries = BTreeMap::new();
        let queries = parallel_map(corpus, self.config.workers, |iv| {
            let s = summaries
                .get(&iv.id)
                .ok_or_else(|| PipelineError::MissingSummary(iv.id.clone()))?;
            let segs = s.segments.iter().map(|t| self.embed_one(t)).collect::<Result<Vec<_>>>()?;
            Ok((segs, self.embed_one(&s.full())?))
        })?;
        for (iv, (segs, full)) in corpus.iter().zip(queries) {
            segment_queries.insert(iv.id.clone(), segs);
            full_queries.insert(iv.id.clone(), full);
        }
        Ok(Prepared {
            summaries,
            interview_chunks,
            manual_chunks: self.manual_chunks()?,
            subject_index,
            segment_queries,
            full_queries,
        })
    }

    fn units(&self, prepared: &Prepared, id: &str, flags: &AblationFlags) -> Result<Vec<Unit>> {
        let s = prepared
            .summaries
            .get(id)
            .ok_or_else(|| PipelineError::MissingSummary(id.to_string()))?;
        if flags.ensemble {
            let queries = &prepared.segment_queries[id];
            Ok(s.segments
                .iter()
                .zip(queries)
                .enumerate()
                .map(|(i, (summary, q))| Unit {
                    index: i,
                    summary: summary.clone(),
                    model_tag: model_tag(flags, i),
                    query: q.clone(),
                })
                .collect())
        } else {
            Ok(vec![Unit {
                index: 0,
                summary: s.full(),
                model_tag: model_tag(flags, 0),
                query: prepared.full_queries[id].clone(),
            }])
        }
    }

    /// Index of manual excerpts and training-fold transcripts, per `flags`.
    pub fn fold_index(&self, prepared: &Prepared, train_ids: &BTreeSet<&str>, flags: &AblationFlags) -> Result<VectorIndex> {
        let mut index = VectorIndex::new();
        if flags.manual {
            index.add(prepared.manual_chunks.clone())?;
        }
        if flags.train_interviews_in_vdb {
            for id in train_ids {
                if let Some(chunks) = prepared.interview_chunks.get(*id) {
                    index.add(chunks.clone())?;
                }
            }
        }
        Ok(index)
    }

    /// Top-k per enabled source; the subject's own transcript only from its own chunks.
    pub fn retrieve(
        &self,
        fold_index: &VectorIndex,
        subject_index: &VectorIndex,
        subject_id: &str,
        query: &EmbeddingVector,
        flags: &AblationFlags,
    ) -> Result<Vec<RetrievalHit>> {
        let mut hits = Vec::new();
        let k = self.config.top_k;
        for (source, on) in [
            (KnowledgeSource::ManualExcerpt, flags.manual),
            (KnowledgeSource::TrainingInterview, flags.train_interviews_in_vdb),
        ] {
            if !on {
                continue;
            }
            let filter = QueryFilter::sources([source]).excluding_origin(subject_id);
            match fold_index.query(query, k, &filter) {
                Ok(h) => hits.extend(h),
                Err(RetrievalError::EmptyIndex) => {}
                Err(e) => return Err(e.into()),
            }
        }
        if flags.test_interview_in_vdb {
            let filter = QueryFilter::sources([KnowledgeSource::TestInterview]).with_origin(subject_id);
            match subject_index.query(query, k, &filter) {
                Ok(h) => hits.extend(h),
                Err(RetrievalError::EmptyIndex) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(hits)
    }

    /// Classifies every unit of one interview for every conflict.
    #[allow(clippy::too_many_arguments)]
    fn classify_interview(
        &self,
        prepared: &Prepared,
        fold_index: &VectorIndex,
        subject_index: &VectorIndex,
        id: &str,
        few_shot: &BTreeMap<Conflict, Vec<FewShotExample>>,
        flags: &AblationFlags,
        conflicts: &[Conflict],
    ) -> Result<(BTreeMap<Conflict, Vec<SegmentPrediction>>, usize)> {
        let units = self.units(prepared, id, flags)?;
        let mut out: BTreeMap<Conflict, Vec<SegmentPrediction>> = BTreeMap::new();
        let mut bare = 0;
        for unit in &units {
            let hits = self.retrieve(fold_index, subject_index, id, &unit.query, flags)?;
            for &conflict in conflicts {
                let examples = few_shot.get(&conflict).map(Vec::as_slice).unwrap_or(&[]);
                let unit_flags = AblationFlags {
                    few_shot: flags.few_shot && !examples.is_empty(),
                    ..*flags
                };
                let input = SegmentInput {
                    interview_id: id,
                    conflict,
                    segment_index: unit.index,
                    summary: Some(&unit.summary),
                    few_shot: examples,
                    retrieved: &hits,
                    flags: &unit_flags,
                    model_tag: &unit.model_tag,
                };
                let (pred, mode) = classify_segment(self.backends.completer, self.assets, &input)?;
                bare += usize::from(mode == ParseMode::BareLabel);
                out.entry(conflict).or_default().push(pred);
            }
        }
        Ok((out, bare))
    }

    /// One example per class from `pool`, or `None` when a class is missing.
    pub fn select_few_shot(
        &self,
        prepared: &Prepared,
        pool: &[&Interview],
        conflict: Conflict,
        seed: u64,
    ) -> Option<Vec<FewShotExample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ClassLabel::ALL
            .iter()
            .map(|&label| {
                let mut candidates: Vec<(&str, String)> = pool
                    .iter()
                    .filter(|iv| iv.label(conflict) == Some(label))
                    .filter_map(|iv| prepared.summaries.get(&iv.id).map(|s| (iv.id.as_str(), s.full())))
                    .collect();
                candidates.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then(a.0.cmp(b.0)));
                let (id, summary) = match self.config.few_shot_selection {
                    FewShotSelection::Shortest => candidates.first()?.clone(),
                    FewShotSelection::Random => candidates.choose(&mut rng)?.clone(),
                };
                Some(FewShotExample {
                    interview_id: id.to_string(),
                    summary,
                    label,
                })
            })
            .collect()
    }

    /// Prediction for an interview outside any experiment, e.g. from the CLI.
    pub fn predict_interview(
        &self,
        interview: &Interview,
        summaries: &InterviewSummaries,
        fold_index: &VectorIndex,
        few_shot: &BTreeMap<Conflict, Vec<FewShotExample>>,
        weights: Option<&WeightsFile>,
    ) -> Result<(Vec<Prediction>, Vec<SegmentPrediction>)> {
        let flags = self.config.flags;
        let subject_chunks = self.chunk_and_embed(KnowledgeSource::TestInterview, &interview.id, &interview.full_text())?;
        let mut subject_index = VectorIndex::new();
        subject_index.add(subject_chunks)?;
        let mut prepared = Prepared {
            summaries: BTreeMap::from([(interview.id.clone(), summaries.clone())]),
            interview_chunks: BTreeMap::new(),
            manual_chunks: Vec::new(),
            subject_index: VectorIndex::new(),
            segment_queries: BTreeMap::new(),
            full_queries: BTreeMap::new(),
        };
        let segs = summaries.segments.iter().map(|t| self.embed_one(t)).collect::<Result<Vec<_>>>()?;
        prepared.segment_queries.insert(interview.id.clone(), segs);
        prepared.full_queries.insert(interview.id.clone(), self.embed_one(&summaries.full())?);
        let (by_conflict, _) = self.classify_interview(
            &prepared,
            fold_index,
            &subject_index,
            &interview.id,
            few_shot,
            &flags,
            &Conflict::ALL,
        )?;
        let mut predictions = Vec::new();
        let mut segments = Vec::new();
        for (conflict, preds) in by_conflict {
            let k = preds.len();
            let w = match weights.and_then(|w| w.get(conflict)) {
                Some(w) if flags.weighted_voting && w.k == k => w.clone(),
                _ => AggregatorWeights::uniform(conflict, k),
            };
            predictions.push(aggregate(&preds, &w)?);
            segments.extend(preds);
        }
        Ok((predictions, segments))
    }
}

pub const FEW_SHOT_FORMAT: &str = "psyc-few-shot";

/// Few-shot examples chosen from a training corpus, per conflict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotFile {
    pub format: String,
    pub version: u32,
    pub examples: BTreeMap<Conflict, Vec<FewShotExample>>,
}

impl FewShotFile {
    pub fn new(examples: BTreeMap<Conflict, Vec<FewShotExample>>) -> FewShotFile {
        FewShotFile {
            format: FEW_SHOT_FORMAT.into(),
            version: 1,
            examples,
        }
    }
}

/// Everything `predict_interview` needs, fitted on one labelled corpus.
pub struct FittedModel {
    pub index: VectorIndex,
    pub weights: WeightsFile,
    pub few_shot: FewShotFile,
    pub bare_label_replies: usize,
}

impl Pipeline<'_> {
    /// Fits few-shot examples and aggregator weights on the whole of `corpus`,
    /// with every interview in the index as a training transcript.
    pub fn fit(&self, corpus: &[Interview], prepared: &Prepared) -> Result<FittedModel> {
        if corpus.is_empty() {
            return Err(EnsembleError::EmptyTrainingSet.into());
        }
        let flags = self.config.flags;
        let ids: BTreeSet<&str> = corpus.iter().map(|iv| iv.id.as_str()).collect();
        let index = self.fold_index(prepared, &ids, &flags)?;
        let pool: Vec<&Interview> = corpus.iter().collect();
        let mut few_shot = BTreeMap::new();
        if flags.few_shot {
            for (ci, conflict) in Conflict::ALL.into_iter().enumerate() {
                if let Some(ex) = self.select_few_shot(prepared, &pool, conflict, self.config.seed.wrapping_add(ci as u64)) {
                    few_shot.insert(conflict, ex);
                }
            }
        }
        let classified = parallel_map(corpus, self.config.workers, |iv| {
            self.classify_interview(prepared, &index, &prepared.subject_index, &iv.id, &few_shot, &flags, &Conflict::ALL)
        })?;
        let bare_label_replies = classified.iter().map(|c| c.1).sum();
        let mut aggregators = Vec::new();
        for conflict in Conflict::ALL {
            let labels = labels_of(corpus, conflict)?;
            let training: Vec<(Vec<SegmentPrediction>, ClassLabel)> = corpus
                .iter()
                .zip(&classified)
                .map(|(iv, (preds, _))| (preds[&conflict].clone(), labels[iv.id.as_str()]))
                .collect();
            let k = training[0].0.len();
            aggregators.push(if flags.weighted_voting && k > 1 {
                train_aggregator(&training, conflict, &self.config.train)?
            } else {
                AggregatorWeights::uniform(conflict, k)
            });
        }
        Ok(FittedModel {
            index,
            weights: WeightsFile::new(aggregators),
            few_shot: FewShotFile::new(few_shot),
            bare_label_replies,
        })
    }
}

fn as_source(chunk: &KnowledgeChunk, source: KnowledgeSource) -> KnowledgeChunk {
    let n = chunk.chunk_id.rsplit('#').next().and_then(|n| n.parse().ok()).unwrap_or(0);
    KnowledgeChunk {
        chunk_id: crate::retrieval::chunk_id(source, &chunk.origin_id, n),
        source,
        ..chunk.clone()
    }
}

fn labels_of(corpus: &[Interview], conflict: Conflict) -> Result<BTreeMap<&str, ClassLabel>> {
    corpus
        .iter()
        .map(|iv| {
            iv.label(conflict)
                .map(|l| (iv.id.as_str(), l))
                .ok_or_else(|| PipelineError::MissingLabel {
                    id: iv.id.clone(),
                    conflict,
                })
        })
        .collect()
}

struct FoldOutcome {
    /// Test-fold (truth, fused prediction, per-unit labels) per conflict.
    scored: BTreeMap<Conflict, Vec<(ClassLabel, Prediction, Vec<ClassLabel>)>>,
    audit: FoldAudit,
    bare: usize,
    few_shot_fallbacks: usize,
}

impl Pipeline<'_> {
    fn run_fold(
        &self,
        corpus: &[Interview],
        prepared: &Prepared,
        folds: &FoldAssignment,
        fold: usize,
        run: usize,
        flags: &AblationFlags,
        row_name: &str,
    ) -> Result<FoldOutcome> {
        let test_ids = folds.test_ids(fold);
        let train_ids = folds.train_ids(fold);
        let train: Vec<&Interview> = corpus.iter().filter(|iv| train_ids.contains(iv.id.as_str())).collect();
        let fold_index = self.fold_index(prepared, &train_ids, flags)?;
        let run_seed = self.config.seed.wrapping_add(run as u64);

        let mut few_shot = BTreeMap::new();
        let mut few_shot_fallbacks = 0;
        if flags.few_shot {
            for (ci, conflict) in Conflict::ALL.into_iter().enumerate() {
                let seed = run_seed.wrapping_mul(31).wrapping_add((fold * 4 + ci) as u64);
                match self.select_few_shot(prepared, &train, conflict, seed) {
                    Some(ex) => {
                        few_shot.insert(conflict, ex);
                    }
                    None => few_shot_fallbacks += 1,
                }
            }
        }

        let train_for_weights = flags.weighted_voting && flags.ensemble && self.config.k > 1;
        let to_classify: Vec<&Interview> = corpus
            .iter()
            .filter(|iv| train_for_weights || test_ids.contains(iv.id.as_str()))
            .collect();
        let classified = parallel_map(&to_classify, self.config.workers, |iv| {
            self.classify_interview(
                prepared,
                &fold_index,
                &prepared.subject_index,
                &iv.id,
                &few_shot,
                flags,
                &Conflict::ALL,
            )
        })?;
        let mut bare = 0;
        let mut by_id: BTreeMap<&str, BTreeMap<Conflict, Vec<SegmentPrediction>>> = BTreeMap::new();
        for (iv, (preds, b)) in to_classify.iter().zip(classified) {
            bare += b;
            by_id.insert(&iv.id, preds);
        }

        let mut scored = BTreeMap::new();
        let mut aggregator_ids = BTreeMap::new();
        for conflict in Conflict::ALL {
            let labels = labels_of(corpus, conflict)?;
            let weights = if train_for_weights {
                let training: Vec<(Vec<SegmentPrediction>, ClassLabel)> = train
                    .iter()
                    .map(|iv| (by_id[iv.id.as_str()][&conflict].clone(), labels[iv.id.as_str()]))
                    .collect();
                let w = train_aggregator(&training, conflict, &self.config.train)?;
                aggregator_ids.insert(conflict, w.meta.training_ids.iter().cloned().collect());
                Some(w)
            } else {
                None
            };
            let mut rows = Vec::new();
            for id in &test_ids {
                let preds = &by_id[id][&conflict];
                let w = weights
                    .clone()
                    .unwrap_or_else(|| AggregatorWeights::uniform(conflict, preds.len()));
                let fused = aggregate(preds, &w)?;
                let mut units: Vec<&SegmentPrediction> = preds.iter().collect();
                units.sort_by_key(|p| p.segment_index);
                rows.push((labels[id], fused, units.iter().map(|p| p.distribution.argmax()).collect()));
            }
            scored.insert(conflict, rows);
        }

        let audit = FoldAudit {
            row: row_name.to_string(),
            run,
            fold,
            test_ids: test_ids.iter().map(|s| s.to_string()).collect(),
            index_origins: fold_index.origins(),
            few_shot_ids: few_shot
                .iter()
                .map(|(c, ex)| (*c, ex.iter().map(|e| e.interview_id.clone()).collect()))
                .collect(),
            aggregator_training_ids: aggregator_ids,
        };
        let leaks = audit.leaks();
        if !leaks.is_empty() {
            return Err(PipelineError::Leakage(leaks.join("; ")));
        }
        Ok(FoldOutcome {
            scored,
            audit,
            bare,
            few_shot_fallbacks,
        })
    }

    /// Cross-validated scores for one configuration row.
    pub fn evaluate_row(
        &self,
        corpus: &[Interview],
        prepared: &Prepared,
        flags: &AblationFlags,
        audit: &mut ProvenanceAudit,
        predictions: Option<&mut Vec<Prediction>>,
    ) -> Result<ReportRow> {
        let name = flags.row_name();
        let units = if flags.ensemble { self.config.k } else { 1 };
        let mut fold_scores: BTreeMap<Conflict, Vec<Vec<f64>>> = BTreeMap::new();
        let mut seg_scores: BTreeMap<Conflict, Vec<Vec<Vec<f64>>>> = BTreeMap::new();
        let mut bare = 0;
        let mut fallbacks = 0;
        let mut first_run_predictions = Vec::new();
        for run in 0..self.config.n_runs {
            let folds = stratified_kfold(corpus, self.config.n_folds, self.config.seed.wrapping_add(run as u64))?;
            let mut run_folds: BTreeMap<Conflict, Vec<f64>> = BTreeMap::new();
            let mut run_segs: BTreeMap<Conflict, Vec<Vec<f64>>> = BTreeMap::new();
            for fold in 0..self.config.n_folds {
                let outcome = self
                    .run_fold(corpus, prepared, &folds, fold, run, flags, &name)
                    .map_err(|e| e.within(format!("{name}, run {run}, fold {fold}")))?;
                bare += outcome.bare;
                fallbacks += outcome.few_shot_fallbacks;
                audit.folds_checked += 1;
                if run == 0 {
                    audit.records.push(outcome.audit);
                }
                for (conflict, rows) in outcome.scored {
                    let truth: Vec<ClassLabel> = rows.iter().map(|r| r.0).collect();
                    let fused: Vec<ClassLabel> = rows.iter().map(|r| r.1.label).collect();
                    run_folds.entry(conflict).or_default().push(weighted_f1(&fused, &truth)?);
                    let segs = run_segs.entry(conflict).or_insert_with(|| vec![Vec::new(); units]);
                    for (u, seg) in segs.iter_mut().enumerate() {
                        let labels: Vec<ClassLabel> = rows.iter().map(|r| r.2[u]).collect();
                        seg.push(weighted_f1(&labels, &truth)?);
                    }
                    if run == 0 {
                        first_run_predictions.extend(rows.into_iter().map(|r| r.1));
                    }
                }
            }
            for (c, f) in run_folds {
                fold_scores.entry(c).or_default().push(f);
            }
            for (c, s) in run_segs {
                seg_scores.entry(c).or_default().push(s);
            }
        }
        let basis = CiBasis::for_runs(self.config.n_runs);
        let mut conflicts = BTreeMap::new();
        for (conflict, folds) in fold_scores {
            let per_run = &seg_scores[&conflict];
            let per_segment = (0..units)
                .map(|u| {
                    let by_run: Vec<Vec<f64>> = per_run.iter().map(|r| r[u].clone()).collect();
                    ScoreSummary::from_scores(basis.basis(&by_run))
                })
                .collect();
            conflicts.insert(
                conflict,
                ConflictResult {
                    score: ScoreSummary::from_scores(basis.basis(&folds)),
                    fold_scores: folds,
                    per_segment,
                },
            );
        }
        let segment_average = (0..units)
            .map(|u| conflicts.values().map(|r: &ConflictResult| r.per_segment[u].mean).sum::<f64>() / conflicts.len() as f64)
            .collect();
        if let Some(p) = predictions {
            first_run_predictions.sort_by(|a, b| (a.conflict, &a.interview_id).cmp(&(b.conflict, &b.interview_id)));
            *p = first_run_predictions;
        }
        Ok(ReportRow {
            name,
            flags: *flags,
            conflicts,
            segment_average,
            bare_label_replies: bare,
            few_shot_fallbacks: fallbacks,
        })
    }
}

/// Cross-validated evaluation of `config.flags` followed by each of `extra_rows`.
pub fn run_experiment(
    corpus: &[Interview],
    config: &RunConfig,
    backends: Backends<'_>,
    assets: &PromptAssets,
    extra_rows: &[AblationFlags],
) -> Result<EvalReport> {
    run_experiment_with(corpus, config, backends, assets, extra_rows, None)
}

/// [`run_experiment`] reusing previously computed summaries.
pub fn run_experiment_with(
    corpus: &[Interview],
    config: &RunConfig,
    backends: Backends<'_>,
    assets: &PromptAssets,
    extra_rows: &[AblationFlags],
    summaries: Option<BTreeMap<String, InterviewSummaries>>,
) -> Result<EvalReport> {
    let pipeline = Pipeline::new(backends, assets, config)?;
    crate::corpus::validate_corpus(corpus)?;
    for conflict in Conflict::ALL {
        labels_of(corpus, conflict)?;
    }
    let prepared = pipeline.prepare(corpus, summaries)?;
    let mut audit = ProvenanceAudit::default();
    let mut predictions = Vec::new();
    let mut rows = vec![pipeline.evaluate_row(corpus, &prepared, &config.flags, &mut audit, Some(&mut predictions))?];
    for flags in extra_rows {
        rows.push(pipeline.evaluate_row(corpus, &prepared, flags, &mut audit, None)?);
    }
    Ok(EvalReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        config: config.clone(),
        ci_basis: CiBasis::for_runs(config.n_runs),
        rows,
        baselines: Vec::new(),
        audit,
        predictions,
    })
}

/// Stratified random guessing and the demographics-only network, scored with
/// the same folds as the main experiment for `config.baseline_runs` runs.
/// Per conflict, one score per fold.
type FoldScores = BTreeMap<Conflict, Vec<f64>>;

pub fn run_baselines(corpus: &[Interview], config: &RunConfig, mlp: &MlpConfig) -> Result<Vec<BaselineRow>> {
    config.validate()?;
    let runs: Vec<usize> = (0..config.baseline_runs).collect();
    let per_run = parallel_map(&runs, config.workers, |&run| {
        let seed = config.seed.wrapping_add(run as u64);
        let folds = stratified_kfold(corpus, config.n_folds, seed)?;
        let mut random: BTreeMap<Conflict, Vec<f64>> = BTreeMap::new();
        let mut demo: BTreeMap<Conflict, Vec<f64>> = BTreeMap::new();
        for fold in 0..config.n_folds {
            let test_ids = folds.test_ids(fold);
            for conflict in Conflict::ALL {
                let labels = labels_of(corpus, conflict)?;
                let mut train = Vec::new();
                let mut test = Vec::new();
                for iv in corpus {
                    let d: &Demographics = iv
                        .demographics
                        .as_ref()
                        .ok_or_else(|| EvalError::MissingDemographics(iv.id.clone()))?;
                    if test_ids.contains(iv.id.as_str()) {
                        test.push((d.clone(), labels[iv.id.as_str()]));
                    } else {
                        train.push((d.clone(), labels[iv.id.as_str()]));
                    }
                }
                let truth: Vec<ClassLabel> = test.iter().map(|t| t.1).collect();
                let train_labels: Vec<ClassLabel> = train.iter().map(|t| t.1).collect();
                let sub_seed = seed.wrapping_mul(1_000_003).wrapping_add((fold * NUM_CLASSES + conflict.index()) as u64);
                let guess = random_baseline(&train_labels, truth.len(), sub_seed)?;
                random.entry(conflict).or_default().push(weighted_f1(&guess, &truth)?);
                let test_demo: Vec<Demographics> = test.into_iter().map(|t| t.0).collect();
                let pred = demographic_baseline(&train, &test_demo, mlp, sub_seed)?;
                demo.entry(conflict).or_default().push(weighted_f1(&pred, &truth)?);
            }
        }
        Ok((random, demo))
    })?;
    let basis = CiBasis::for_runs(config.baseline_runs);
    let summarise = |name: &str, pick: &dyn Fn(&(FoldScores, FoldScores)) -> &FoldScores| {
        BaselineRow {
            name: name.into(),
            conflicts: Conflict::ALL
                .into_iter()
                .map(|c| {
                    let folds: Vec<Vec<f64>> = per_run.iter().map(|r| pick(r)[&c].clone()).collect();
                    (c, ScoreSummary::from_scores(basis.basis(&folds)))
                })
                .collect(),
        }
    };
    Ok(vec![
        summarise("Random (stratified)", &|r| &r.0),
        summarise("Demographic MLP", &|r| &r.1),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::corpus::synth::{generate_synthetic_corpus, SyntheticSpec};

    #[test]
    fn model_tags() {
        let full = AblationFlags::default();
        assert_eq!(model_tag(&full, 2), "segment-2");
        assert_eq!(model_tag(&"no-ensemble".parse().unwrap(), 0), "full");
        assert_eq!(model_tag(&"no-fine-tuning".parse().unwrap(), 3), "base");
    }

    #[test]
    fn parallel_map_keeps_order_and_reports_errors() {
        let items: Vec<usize> = (0..50).collect();
        assert_eq!(parallel_map(&items, 4, |x| Ok(x * 2)).unwrap(), items.iter().map(|x| x * 2).collect::<Vec<_>>());
        let err = parallel_map(&items, 4, |&x| {
            if x == 7 {
                Err(PipelineError::MissingSummary(x.to_string()))
            } else {
                Ok(x)
            }
        });
        assert!(matches!(err, Err(PipelineError::MissingSummary(s)) if s == "7"));
    }

    #[test]
    fn small_experiment_runs_and_audits() {
        let spec = SyntheticSpec::default();
        let corpus = generate_synthetic_corpus(3, 30, &spec).unwrap();
        let mock = MockBackend::new(spec.clone());
        let config = RunConfig {
            n_runs: 1,
            synthetic: spec,
            ..RunConfig::default()
        };
        let assets = PromptAssets::builtin();
        let backends = Backends {
            completer: &mock,
            embedder: &mock,
        };
        let report = run_experiment(&corpus, &config, backends, &assets, &["no-weighted-voting".parse().unwrap()]).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[1].name, "w/o Weighted Voting");
        assert_eq!(report.audit.folds_checked, 10);
        assert!(report.audit.records.iter().all(|r| r.leaks().is_empty()));
        assert_eq!(report.predictions.len(), 30 * 4);
        for r in &report.audit.records {
            assert!(r
                .index_origins
                .iter()
                .any(|(s, _)| *s == KnowledgeSource::ManualExcerpt));
        }
    }
}
