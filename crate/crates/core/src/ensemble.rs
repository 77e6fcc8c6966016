//! Per-segment classification and weighted-voting fusion.
//!
//! Each of the `k` segment models yields a distribution `p_i` over the five
//! classes; the fused distribution is `Σ_i w_i p_i` with `w` on the simplex and
//! the prediction is its argmax, ties going to the lowest class index.
//! Weights are `softmax(θ)`, fitted per conflict by maximising the training
//! log-likelihood of the mixture.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ablation::AblationFlags;
use crate::assets::PromptAssets;
use crate::backend::{Completer, CompletionRequest};
use crate::corpus::{ClassLabel, Conflict, NUM_CLASSES};
use crate::prompting::{build_classification_prompt, parse_class_output, FewShotExample, ParseMode};
use crate::retrieval::RetrievalHit;

pub const WEIGHTS_FORMAT: &str = "psyc-aggregator-weights";
pub const WEIGHTS_VERSION: u32 = 1;

/// Added inside the logarithm so a zero-probability true class stays finite.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid class distribution: {0}")]
    InvalidDistribution(String),
    #[error("{interview_id}/{conflict}: no prediction for segment {index}")]
    MissingSegment { interview_id: String, conflict: Conflict, index: usize },
    #[error("{interview_id}/{conflict}: segment {index} predicted twice")]
    DuplicateSegment { interview_id: String, conflict: Conflict, index: usize },
    #[error("predictions mix interviews or conflicts")]
    MixedPredictions,
    #[error("{got} predictions for {expected} weights")]
    WeightArityMismatch { expected: usize, got: usize },
    #[error("weights for {weights} applied to {predictions}")]
    ConflictMismatch { weights: Conflict, predictions: Conflict },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error("{interview_id}/{conflict}/segment {segment_index}: {message}")]
    Classification {
        interview_id: String,
        conflict: Conflict,
        segment_index: usize,
        message: String,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid weights file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, EnsembleError>;

/// Probabilities over the five classes in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct ClassDistribution([f64; NUM_CLASSES]);

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    probs: [f64; NUM_CLASSES],
}

impl TryFrom<DistributionRepr> for ClassDistribution {
    type Error = EnsembleError;

    fn try_from(r: DistributionRepr) -> Result<Self> {
        ClassDistribution::new(r.probs)
    }
}

impl From<ClassDistribution> for DistributionRepr {
    fn from(d: ClassDistribution) -> Self {
        DistributionRepr { probs: d.0 }
    }
}

impl ClassDistribution {
    pub fn new(probs: [f64; NUM_CLASSES]) -> Result<ClassDistribution> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(EnsembleError::InvalidDistribution(format!("{probs:?} has a negative or non-finite entry")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(EnsembleError::InvalidDistribution(format!("{probs:?} sums to {total}")));
        }
        Ok(ClassDistribution(probs))
    }

    /// Divides non-negative masses by their sum.
    pub fn normalised(mass: [f64; NUM_CLASSES]) -> Result<ClassDistribution> {
        let total: f64 = mass.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(EnsembleError::InvalidDistribution(format!("{mass:?} has no positive finite mass")));
        }
        ClassDistribution::new(mass.map(|m| m / total))
    }

    pub fn uniform() -> ClassDistribution {
        ClassDistribution([1.0 / NUM_CLASSES as f64; NUM_CLASSES])
    }

    pub fn one_hot(label: ClassLabel) -> ClassDistribution {
        let mut p = [0.0; NUM_CLASSES];
        p[label.index()] = 1.0;
        ClassDistribution(p)
    }

    pub fn probs(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    pub fn p(&self, label: ClassLabel) -> f64 {
        self.0[label.index()]
    }

    /// Most probable class; ties go to the lowest class index.
    pub fn argmax(&self) -> ClassLabel {
        ClassLabel::from_index(argmax_index(&self.0)).expect("index below NUM_CLASSES")
    }
}

fn argmax_index(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub interview_id: String,
    pub conflict: Conflict,
    pub segment_index: usize,
    pub distribution: ClassDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub interview_id: String,
    pub conflict: Conflict,
    pub label: ClassLabel,
    pub fused_distribution: ClassDistribution,
}

/// Everything one segment model sees.
#[derive(Debug, Clone)]
pub struct SegmentInput<'a> {
    pub interview_id: &'a str,
    pub conflict: Conflict,
    pub segment_index: usize,
    pub summary: Option<&'a str>,
    pub few_shot: &'a [FewShotExample],
    pub retrieved: &'a [RetrievalHit],
    pub flags: &'a AblationFlags,
    pub model_tag: &'a str,
}

/// Builds the classification prompt, calls the backend and parses the reply.
/// Errors name the interview, conflict and segment.
pub fn classify_segment(
    backend: &dyn Completer,
    assets: &PromptAssets,
    input: &SegmentInput<'_>,
) -> Result<(SegmentPrediction, ParseMode)> {
    let fail = |message: String| EnsembleError::Classification {
        interview_id: input.interview_id.to_string(),
        conflict: input.conflict,
        segment_index: input.segment_index,
        message,
    };
    let bundle = build_classification_prompt(
        assets,
        input.conflict,
        input.summary,
        input.few_shot,
        input.retrieved,
        input.flags,
    )
    .map_err(|e| fail(e.to_string()))?;
    let raw = backend
        .complete(&CompletionRequest::new(bundle.render(), input.model_tag))
        .map_err(|e| fail(e.to_string()))?;
    let parsed = parse_class_output(&raw).map_err(|e| fail(e.to_string()))?;
    Ok((
        SegmentPrediction {
            interview_id: input.interview_id.to_string(),
            conflict: input.conflict,
            segment_index: input.segment_index,
            distribution: parsed.distribution,
        },
        parsed.mode,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregatorModel {
    /// One convex weight per segment.
    #[default]
    Weighted,
    /// Multinomial logistic regression over all `5k` segment probabilities.
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: AggregatorModel,
    /// Initial step size; adapted during training.
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step changes the objective by less than this.
    pub tolerance: f64,
    /// L2 penalty for the logistic mode.
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: AggregatorModel::Weighted,
            learning_rate: 0.1,
            max_iterations: 2000,
            tolerance: 1e-9,
            l2: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    /// Mean negative log-likelihood at the returned parameters.
    pub final_nll: f64,
    pub converged: bool,
    pub seed: u64,
    pub n_examples: usize,
    /// Interviews the weights were fitted on.
    pub training_ids: Vec<String>,
    /// Objective after every accepted step, starting from the initial point.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nll_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// `NUM_CLASSES` rows of `k * NUM_CLASSES` coefficients.
    pub coef: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LogisticParams {
    fn predict(&self, x: &[f64]) -> [f64; NUM_CLASSES] {
        let mut z = [0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            z[c] = self.bias[c] + self.coef[c].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        softmax5(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorWeights {
    pub conflict: Conflict,
    pub k: usize,
    pub model: AggregatorModel,
    /// On the simplex. In logistic mode: each segment's share of total |coefficient|.
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic: Option<LogisticParams>,
    pub meta: TrainingMeta,
}

impl AggregatorWeights {
    pub fn uniform(conflict: Conflict, k: usize) -> AggregatorWeights {
        AggregatorWeights {
            conflict,
            k,
            model: AggregatorModel::Weighted,
            weights: vec![1.0 / k as f64; k],
            logistic: None,
            meta: TrainingMeta::default(),
        }
    }

    /// Normalises non-negative raw weights onto the simplex.
    pub fn from_raw(conflict: Conflict, raw: &[f64]) -> Result<AggregatorWeights> {
        let total: f64 = raw.iter().sum();
        if raw.is_empty() || raw.iter().any(|w| *w < 0.0 || !w.is_finite()) || total <= 0.0 {
            return Err(EnsembleError::InvalidWeights(format!("{raw:?}")));
        }
        Ok(AggregatorWeights {
            weights: raw.iter().map(|w| w / total).collect(),
            ..AggregatorWeights::uniform(conflict, raw.len())
        })
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if self.weights.len() != self.k || self.weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(EnsembleError::InvalidWeights(format!(
                "{} weights {:?} do not form a {}-simplex point",
                self.conflict, self.weights, self.k
            )));
        }
        if let Some(l) = &self.logistic {
            if l.bias.len() != NUM_CLASSES
                || l.coef.len() != NUM_CLASSES
                || l.coef.iter().any(|r| r.len() != self.k * NUM_CLASSES)
            {
                return Err(EnsembleError::InvalidWeights("logistic parameter shape".into()));
            }
        }
        Ok(())
    }
}

/// Orders predictions by segment index, checking coverage of `0..k`.
fn ordered(preds: &[SegmentPrediction], k: usize) -> Result<Vec<&ClassDistribution>> {
    let first = preds.first().ok_or(EnsembleError::WeightArityMismatch { expected: k, got: 0 })?;
    if preds
        .iter()
        .any(|p| p.interview_id != first.interview_id || p.conflict != first.conflict)
    {
        return Err(EnsembleError::MixedPredictions);
    }
    let mut slots: Vec<Option<&ClassDistribution>> = vec![None; k];
    for p in preds {
        let err_ctx = (first.interview_id.clone(), first.conflict, p.segment_index);
        match slots.get_mut(p.segment_index) {
            None => {
                return Err(EnsembleError::WeightArityMismatch {
                    expected: k,
                    got: p.segment_index + 1,
                })
            }
            Some(Some(_)) => {
                return Err(EnsembleError::DuplicateSegment {
                    interview_id: err_ctx.0,
                    conflict: err_ctx.1,
                    index: err_ctx.2,
                })
            }
            Some(slot) => *slot = Some(&p.distribution),
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(index, s)| {
            s.ok_or_else(|| EnsembleError::MissingSegment {
                interview_id: first.interview_id.clone(),
                conflict: first.conflict,
                index,
            })
        })
        .collect()
}

/// `Σ_i w_i p_i`.
pub fn fuse(dists: &[&ClassDistribution], weights: &[f64]) -> [f64; NUM_CLASSES] {
    let mut out = [0.0; NUM_CLASSES];
    for (d, w) in dists.iter().zip(weights) {
        for (o, p) in out.iter_mut().zip(d.probs()) {
            *o += w * p;
        }
    }
    out
}

fn features(dists: &[&ClassDistribution]) -> Vec<f64> {
    dists.iter().flat_map(|d| d.probs().iter().copied()).collect()
}

pub fn aggregate(preds: &[SegmentPrediction], weights: &AggregatorWeights) -> Result<Prediction> {
    weights.validate()?;
    if preds.len() != weights.k {
        return Err(EnsembleError::WeightArityMismatch {
            expected: weights.k,
            got: preds.len(),
        });
    }
    let dists = ordered(preds, weights.k)?;
    if preds[0].conflict != weights.conflict {
        return Err(EnsembleError::ConflictMismatch {
            weights: weights.conflict,
            predictions: preds[0].conflict,
        });
    }
    let fused = match (&weights.model, &weights.logistic) {
        (AggregatorModel::Logistic, Some(params)) => params.predict(&features(&dists)),
        _ => fuse(&dists, &weights.weights),
    };
    // Renormalise away rounding drift so the invariant holds to 1e-9.
    let fused = ClassDistribution::normalised(fused)?;
    Ok(Prediction {
        interview_id: preds[0].interview_id.clone(),
        conflict: preds[0].conflict,
        label: fused.argmax(),
        fused_distribution: fused,
    })
}

/// Equal weights `1/k`.
pub fn aggregate_unweighted(preds: &[SegmentPrediction]) -> Result<Prediction> {
    let first = preds.first().ok_or(EnsembleError::WeightArityMismatch { expected: 1, got: 0 })?;
    aggregate(preds, &AggregatorWeights::uniform(first.conflict, preds.len()))
}

pub fn softmax(theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = theta.iter().map(|t| (t - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn softmax5(z: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let s = softmax(&z);
    [s[0], s[1], s[2], s[3], s[4]]
}

/// One training example: per-segment probabilities in index order, and the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureExample {
    pub probs: Vec<[f64; NUM_CLASSES]>,
    pub truth: ClassLabel,
}

/// Mean log-likelihood `1/N Σ_n log(Σ_i softmax(θ)_i p_{n,i}(y_n) + ε)`.
pub fn mixture_objective(theta: &[f64], data: &[MixtureExample]) -> f64 {
    let w = softmax(theta);
    let total: f64 = data
        .iter()
        .map(|ex| {
            let m: f64 = ex.probs.iter().zip(&w).map(|(p, w)| w * p[ex.truth.index()]).sum();
            (m + LOG_EPS).ln()
        })
        .sum();
    total / data.len() as f64
}

/// Gradient of [`mixture_objective`]: `∂/∂θ_j = mean_n w_j (p_{n,j}(y_n) − m_n) / (m_n + ε)`.
pub fn mixture_gradient(theta: &[f64], data: &[MixtureExample]) -> Vec<f64> {
    let w = softmax(theta);
    let mut g = vec![0.0; theta.len()];
    for ex in data {
        let py: Vec<f64> = ex.probs.iter().map(|p| p[ex.truth.index()]).collect();
        let m: f64 = py.iter().zip(&w).map(|(p, w)| w * p).sum();
        for j in 0..theta.len() {
            g[j] += w[j] * (py[j] - m) / (m + LOG_EPS);
        }
    }
    let n = data.len() as f64;
    g.iter_mut().for_each(|x| *x /= n);
    g
}

struct AscentResult {
    params: Vec<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Gradient ascent with an adaptive step: the step grows by 1.2 after an
/// improving step and halves (without moving) after a worsening one.
fn ascend(
    init: Vec<f64>,
    hyper: &TrainConfig,
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
) -> AscentResult {
    let mut params = init;
    let mut value = objective(&params);
    let mut history = vec![value];
    let mut lr = hyper.learning_rate;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < hyper.max_iterations {
        iterations += 1;
        let g = gradient(&params);
        if g.iter().all(|x| x.abs() < 1e-15) {
            converged = true;
            break;
        }
        let candidate: Vec<f64> = params.iter().zip(&g).map(|(p, g)| p + lr * g).collect();
        let next = objective(&candidate);
        if next >= value {
            let delta = next - value;
            params = candidate;
            value = next;
            history.push(value);
            lr *= 1.2;
            if delta < hyper.tolerance {
                converged = true;
                break;
            }
        } else {
            lr *= 0.5;
            if lr < 1e-15 {
                converged = true;
                break;
            }
        }
    }
    AscentResult {
        params,
        objective: value,
        iterations,
        converged,
        history,
    }
}

fn training_matrix(
    training: &[(Vec<SegmentPrediction>, ClassLabel)],
    conflict: Conflict,
) -> Result<(usize, Vec<MixtureExample>, Vec<String>)> {
    let (first, _) = training.first().ok_or(EnsembleError::EmptyTrainingSet)?;
    let k = first.len();
    let mut data = Vec::with_capacity(training.len());
    let mut ids = BTreeSet::new();
    for (preds, truth) in training {
        if preds.len() != k {
            return Err(EnsembleError::WeightArityMismatch {
                expected: k,
                got: preds.len(),
            });
        }
        let dists = ordered(preds, k)?;
        if preds[0].conflict != conflict {
            return Err(EnsembleError::ConflictMismatch {
                weights: conflict,
                predictions: preds[0].conflict,
            });
        }
        ids.insert(preds[0].interview_id.clone());
        data.push(MixtureExample {
            probs: dists.iter().map(|d| *d.probs()).collect(),
            truth: *truth,
        });
    }
    Ok((k, data, ids.into_iter().collect()))
}

/// Fits aggregator parameters for one conflict. Running out of iterations is
/// not an error; `meta.converged` is false in that case.
pub fn train_aggregator(
    training: &[(Vec<SegmentPrediction>, ClassLabel)],
    conflict: Conflict,
    hyper: &TrainConfig,
) -> Result<AggregatorWeights> {
    let (k, data, training_ids) = training_matrix(training, conflict)?;
    match hyper.model {
        AggregatorModel::Weighted => {
            let r = ascend(
                vec![0.0; k],
                hyper,
                |t| mixture_objective(t, &data),
                |t| mixture_gradient(t, &data),
            );
            Ok(AggregatorWeights {
                conflict,
                k,
                model: AggregatorModel::Weighted,
                weights: softmax(&r.params),
                logistic: None,
                meta: TrainingMeta {
                    iterations: r.iterations,
                    final_nll: -r.objective,
                    converged: r.converged,
                    seed: hyper.seed,
                    n_examples: data.len(),
                    training_ids,
                    nll_history: r.history.iter().map(|v| -v).collect(),
                },
            })
        }
        AggregatorModel::Logistic => train_logistic(k, &data, conflict, hyper, training_ids),
    }
}

fn logistic_split(params: &[f64], d: usize) -> LogisticParams {
    let coef = (0..NUM_CLASSES).map(|c| params[c * d..(c + 1) * d].to_vec()).collect();
    let bias = params[NUM_CLASSES * d..].to_vec();
    LogisticParams { coef, bias }
}

/// Mean log-likelihood minus `λ/2 ||W||²` (bias unpenalised).
fn logistic_objective(params: &[f64], xs: &[Vec<f64>], ys: &[usize], l2: f64) -> f64 {
    let d = xs[0].len();
    let model = logistic_split(params, d);
    let ll: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| (model.predict(x)[y] + LOG_EPS).ln())
        .sum::<f64>()
        / xs.len() as f64;
    let penalty: f64 = params[..NUM_CLASSES * d].iter().map(|w| w * w).sum();
    ll - 0.5 * l2 * penalty
}

fn logistic_gradient(params: &[f64], xs: &[Vec<f64>], ys: &[usize], l2: f64) -> Vec<f64> {
    let d = xs[0].len();
    let model = logistic_split(params, d);
    let mut g = vec![0.0; params.len()];
    let n = xs.len() as f64;
    for (x, &y) in xs.iter().zip(ys) {
        let p = model.predict(x);
        for c in 0..NUM_CLASSES {
            let r = (if c == y { 1.0 } else { 0.0 }) - p[c];
            for (j, xj) in x.iter().enumerate() {
                g[c * d + j] += r * xj / n;
            }
            g[NUM_CLASSES * d + c] += r / n;
        }
    }
    for (gi, w) in g.iter_mut().zip(params).take(NUM_CLASSES * d) {
        *gi -= l2 * w;
    }
    g
}

fn train_logistic(
    k: usize,
    data: &[MixtureExample],
    conflict: Conflict,
    hyper: &TrainConfig,
    training_ids: Vec<String>,
) -> Result<AggregatorWeights> {
    let xs: Vec<Vec<f64>> = data.iter().map(|ex| ex.probs.iter().flatten().copied().collect()).collect();
    let ys: Vec<usize> = data.iter().map(|ex| ex.truth.index()).collect();
    let d = k * NUM_CLASSES;
    let r = ascend(
        vec![0.0; NUM_CLASSES * d + NUM_CLASSES],
        hyper,
        |p| logistic_objective(p, &xs, &ys, hyper.l2),
        |p| logistic_gradient(p, &xs, &ys, hyper.l2),
    );
    let params = logistic_split(&r.params, d);
    let mut importance = vec![0.0; k];
    for row in &params.coef {
        for (j, w) in row.iter().enumerate() {
            importance[j / NUM_CLASSES] += w.abs();
        }
    }
    let total: f64 = importance.iter().sum();
    let weights = if total > 0.0 {
        importance.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    };
    Ok(AggregatorWeights {
        conflict,
        k,
        model: AggregatorModel::Logistic,
        weights,
        logistic: Some(params),
        meta: TrainingMeta {
            iterations: r.iterations,
            final_nll: -r.objective,
            converged: r.converged,
            seed: hyper.seed,
            n_examples: data.len(),
            training_ids,
            nll_history: r.history.iter().map(|v| -v).collect(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub format: String,
    pub version: u32,
    pub aggregators: Vec<AggregatorWeights>,
}

impl WeightsFile {
    pub fn new(aggregators: Vec<AggregatorWeights>) -> WeightsFile {
        WeightsFile {
            format: WEIGHTS_FORMAT.into(),
            version: WEIGHTS_VERSION,
            aggregators,
        }
    }

    pub fn get(&self, conflict: Conflict) -> Option<&AggregatorWeights> {
        self.aggregators.iter().find(|a| a.conflict == conflict)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("weights serialise");
        fs::write(path, json).map_err(|source| EnsembleError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<WeightsFile> {
        let json = fs::read_to_string(path).map_err(|source| EnsembleError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: WeightsFile = serde_json::from_str(&json).map_err(|e| EnsembleError::Format(e.to_string()))?;
        if file.format != WEIGHTS_FORMAT || file.version != WEIGHTS_VERSION {
            return Err(EnsembleError::Format(format!(
                "expected {WEIGHTS_FORMAT} v{WEIGHTS_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        for a in &file.aggregators {
            a.validate()?;
        }
        Ok(file)
    }
}
