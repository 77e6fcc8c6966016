mod artifacts;
mod error;
mod settings;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use psyc_core::assets::PromptAssets;
use psyc_core::backend::{BackendConfig, MockBackend, RemoteBackend};
use psyc_core::corpus::synth::generate_synthetic_corpus;
use psyc_core::corpus::{read_corpus, write_corpus_dir};
use psyc_core::ensemble::{Prediction, SegmentPrediction, WeightsFile};
use psyc_core::evaluation::{cdd, CddExample, EvalReport, FairnessReport, MlpConfig, GROUP_DEFINITION};
use psyc_core::pipeline::{run_baselines, run_experiment_with, Backends, FewShotFile, InterviewSummaries, Pipeline};
use psyc_core::retrieval::{KnowledgeSource, VectorIndex};
use psyc_core::{Conflict, Interview, RunConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use artifacts::{read_json, require, write_json, write_text, Manifest, OutputLock};
use error::CliError;
use settings::GlobalArgs;

#[derive(Debug, Parser)]
#[command(name = "psyc", version, about = "Psychodynamic conflict classification from interview transcripts")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    /// Directory overriding the built-in prompt texts and manual excerpts.
    #[arg(long, global = true)]
    assets: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a config template with every default documented (default: psyc.toml).
    Init {
        #[arg(long)]
        force: bool,
    },
    /// Generate a labelled synthetic corpus directory (default: corpus).
    Synth {
        #[arg(long, default_value_t = 60)]
        n: usize,
    },
    /// Summarise every segment of every interview (default: summaries.json).
    Summarise {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Build a vector index from the manual excerpts and, optionally, a corpus (default: index.json).
    Index {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Fit few-shot examples and aggregator weights on a labelled corpus (default: model/).
    TrainWeights {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        summaries: Option<PathBuf>,
    },
    /// Classify interviews, labelled or not (default: predictions.json).
    Classify {
        /// One interview file, an NDJSON file or a corpus directory.
        #[arg(long)]
        input: PathBuf,
        /// Output directory of `train-weights`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Index to retrieve from when no model is given.
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Cross-validated evaluation with ablation rows and baselines (default: report/).
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        summaries: Option<PathBuf>,
        #[arg(long)]
        no_baselines: bool,
    },
    /// Conditional demographic disparity of a report's predictions (default: fairness/).
    Fairness {
        /// `report.json` written by `evaluate`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
}

const SUMMARIES_FORMAT: &str = "psyc-summaries";
const PREDICTIONS_FORMAT: &str = "psyc-predictions";
const FAIRNESS_FORMAT: &str = "psyc-fairness";

#[derive(Debug, Serialize, Deserialize)]
struct SummariesFile {
    format: String,
    version: u32,
    k: usize,
    summaries: BTreeMap<String, InterviewSummaries>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionsFile {
    format: String,
    version: u32,
    predictions: Vec<Prediction>,
    segments: Vec<SegmentPrediction>,
}

#[derive(Debug, Serialize)]
struct FairnessFile<'a> {
    format: &'static str,
    version: u32,
    /// Report row whose predictions were assessed.
    row: &'a str,
    #[serde(flatten)]
    report: &'a FairnessReport,
}

enum Backend {
    Mock(MockBackend),
    Remote(RemoteBackend),
}

impl Backend {
    fn from_config(config: &RunConfig) -> Backend {
        match &config.backend {
            BackendConfig::Mock => Backend::Mock(MockBackend::new(config.synthetic.clone())),
            BackendConfig::Remote(r) => Backend::Remote(RemoteBackend::new(r.clone().with_env())),
        }
    }

    fn backends(&self) -> Backends<'_> {
        match self {
            Backend::Mock(m) => Backends {
                completer: m,
                embedder: m,
            },
            Backend::Remote(r) => Backends {
                completer: r,
                embedder: r,
            },
        }
    }
}

struct Context {
    config: RunConfig,
    assets: PromptAssets,
    backend: Backend,
}

impl Context {
    fn new(global: &GlobalArgs, assets: Option<&Path>, apply_ablations: bool) -> Result<Context, CliError> {
        let mut config = global.load()?;
        if apply_ablations {
            for a in global.ablations()? {
                config.flags = and_flags(&config.flags, &a);
            }
        }
        let assets = match assets {
            Some(dir) => {
                require(dir)?;
                PromptAssets::load_dir(dir).map_err(|e| CliError::ConfigInvalid(e.to_string()))?
            }
            None => PromptAssets::builtin(),
        };
        let backend = Backend::from_config(&config);
        Ok(Context {
            config,
            assets,
            backend,
        })
    }

    fn pipeline(&self) -> Result<Pipeline<'_>, CliError> {
        Ok(Pipeline::new(self.backend.backends(), &self.assets, &self.config)?)
    }
}

/// Ingredients on in both.
fn and_flags(a: &psyc_core::AblationFlags, b: &psyc_core::AblationFlags) -> psyc_core::AblationFlags {
    psyc_core::AblationFlags {
        manual: a.manual && b.manual,
        train_interviews_in_vdb: a.train_interviews_in_vdb && b.train_interviews_in_vdb,
        test_interview_in_vdb: a.test_interview_in_vdb && b.test_interview_in_vdb,
        subject_summary: a.subject_summary && b.subject_summary,
        few_shot: a.few_shot && b.few_shot,
        weighted_voting: a.weighted_voting && b.weighted_voting,
        ensemble: a.ensemble && b.ensemble,
        fine_tuned_tags: a.fine_tuned_tags && b.fine_tuned_tags,
    }
}

fn load_corpus(path: &Path) -> Result<Vec<Interview>, CliError> {
    require(path)?;
    Ok(read_corpus(path)?)
}

fn load_summaries(path: Option<&Path>, config: &RunConfig) -> Result<Option<BTreeMap<String, InterviewSummaries>>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let file: SummariesFile = read_json(path)?;
    if file.format != SUMMARIES_FORMAT {
        return Err(CliError::Format(format!("{}: not a summaries file", path.display())));
    }
    if file.k != config.k {
        return Err(CliError::ConfigInvalid(format!(
            "{} was produced with k = {}, but k = {}",
            path.display(),
            file.k,
            config.k
        )));
    }
    Ok(Some(file.summaries))
}

fn out_path(global: &GlobalArgs, default: &str) -> PathBuf {
    global.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn cmd_init(global: &GlobalArgs, force: bool) -> Result<(), CliError> {
    let out = out_path(global, "psyc.toml");
    if out.exists() && !force {
        return Err(CliError::Usage(format!("{} exists; pass --force to overwrite", out.display())));
    }
    write_text(&out, &settings::template())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_synth(global: &GlobalArgs, n: usize) -> Result<(), CliError> {
    let config = global.load()?;
    let out = out_path(global, "corpus");
    let _lock = OutputLock::acquire(&out)?;
    let corpus = generate_synthetic_corpus(config.seed, n, &config.synthetic)?;
    write_corpus_dir(&out, &corpus)?;
    let manifest = Manifest::new("synth", json!({ "n": n }), &config);
    manifest.write(&out, &[&out])?;
    println!("wrote {n} interviews to {}", out.display());
    Ok(())
}

fn cmd_summarise(global: &GlobalArgs, assets: Option<&Path>, corpus_path: &Path) -> Result<(), CliError> {
    let ctx = Context::new(global, assets, true)?;
    let corpus = load_corpus(corpus_path)?;
    let out = out_path(global, "summaries.json");
    let _lock = OutputLock::acquire(&out)?;
    let summaries = ctx.pipeline()?.summarise_corpus(&corpus)?;
    write_json(
        &out,
        &SummariesFile {
            format: SUMMARIES_FORMAT.into(),
            version: 1,
            k: ctx.config.k,
            summaries,
        },
    )?;
    let mut manifest = Manifest::new("summarise", json!({ "corpus": corpus_path }), &ctx.config);
    manifest.input(corpus_path)?;
    manifest.write(&out, &[&out])?;
    println!("summarised {} interviews into {}", corpus.len(), out.display());
    Ok(())
}

fn cmd_index(global: &GlobalArgs, assets: Option<&Path>, corpus_path: Option<&Path>) -> Result<(), CliError> {
    let ctx = Context::new(global, assets, true)?;
    let pipeline = ctx.pipeline()?;
    let out = out_path(global, "index.json");
    let _lock = OutputLock::acquire(&out)?;
    let mut index = VectorIndex::new();
    if ctx.config.flags.manual {
        index.add(pipeline.manual_chunks()?)?;
    }
    let mut manifest = Manifest::new("index", json!({ "corpus": corpus_path }), &ctx.config);
    if let Some(path) = corpus_path {
        for iv in load_corpus(path)? {
            index.add(pipeline.chunk_and_embed(KnowledgeSource::TrainingInterview, &iv.id, &iv.full_text())?)?;
        }
        manifest.input(path)?;
    }
    index.save(&out)?;
    manifest.write(&out, &[&out])?;
    println!("indexed {} chunks into {}", index.len(), out.display());
    Ok(())
}

fn cmd_train_weights(
    global: &GlobalArgs,
    assets: Option<&Path>,
    corpus_path: &Path,
    summaries_path: Option<&Path>,
) -> Result<(), CliError> {
    let ctx = Context::new(global, assets, true)?;
    let corpus = load_corpus(corpus_path)?;
    let summaries = load_summaries(summaries_path, &ctx.config)?;
    let out = out_path(global, "model");
    let _lock = OutputLock::acquire(&out)?;
    let pipeline = ctx.pipeline()?;
    let prepared = pipeline.prepare(&corpus, summaries)?;
    let model = pipeline.fit(&corpus, &prepared)?;
    create_dir(&out)?;
    let (index_path, weights_path, few_shot_path) = (out.join("index.json"), out.join("weights.json"), out.join("few-shot.json"));
    model.index.save(&index_path)?;
    model.weights.save(&weights_path)?;
    write_json(&few_shot_path, &model.few_shot)?;
    let mut manifest = Manifest::new(
        "train-weights",
        json!({ "corpus": corpus_path, "summaries": summaries_path, "bare_label_replies": model.bare_label_replies }),
        &ctx.config,
    );
    manifest.input(corpus_path)?;
    if let Some(p) = summaries_path {
        manifest.input(p)?;
    }
    manifest.write(&out, &[&index_path, &weights_path, &few_shot_path])?;
    for a in &model.weights.aggregators {
        let w: Vec<String> = a.weights.iter().map(|w| format!("{w:.3}")).collect();
        println!("{:<40} [{}]", a.conflict.display_name(), w.join(", "));
    }
    println!("wrote model to {}", out.display());
    Ok(())
}

fn cmd_classify(
    global: &GlobalArgs,
    assets: Option<&Path>,
    input: &Path,
    model: Option<&Path>,
    index_path: Option<&Path>,
) -> Result<(), CliError> {
    let ctx = Context::new(global, assets, true)?;
    let interviews = load_corpus(input)?;
    let pipeline = ctx.pipeline()?;
    let out = out_path(global, "predictions.json");
    let _lock = OutputLock::acquire(&out)?;
    let mut manifest = Manifest::new("classify", json!({ "input": input, "model": model, "index": index_path }), &ctx.config);
    manifest.input(input)?;
    let (index, weights, few_shot) = match (model, index_path) {
        (Some(dir), _) => {
            require(dir)?;
            manifest.input(dir)?;
            let few: FewShotFile = read_json(&dir.join("few-shot.json"))?;
            (
                VectorIndex::load(&dir.join("index.json"))?,
                Some(WeightsFile::load(&dir.join("weights.json"))?),
                few.examples,
            )
        }
        (None, Some(path)) => {
            require(path)?;
            manifest.input(path)?;
            (VectorIndex::load(path)?, None, BTreeMap::new())
        }
        (None, None) => {
            let mut index = VectorIndex::new();
            if ctx.config.flags.manual {
                index.add(pipeline.manual_chunks()?)?;
            }
            (index, None, BTreeMap::new())
        }
    };
    let mut predictions = Vec::new();
    let mut segments = Vec::new();
    for iv in &interviews {
        let summaries = pipeline.summarise_interview(iv)?;
        let (p, s) = pipeline.predict_interview(iv, &summaries, &index, &few_shot, weights.as_ref())?;
        for pred in &p {
            println!("{}\t{}\t{}", pred.interview_id, pred.conflict.slug(), pred.label);
        }
        predictions.extend(p);
        segments.extend(s);
    }
    write_json(
        &out,
        &PredictionsFile {
            format: PREDICTIONS_FORMAT.into(),
            version: 1,
            predictions,
            segments,
        },
    )?;
    manifest.write(&out, &[&out])?;
    Ok(())
}

fn cmd_evaluate(
    global: &GlobalArgs,
    assets: Option<&Path>,
    corpus_path: &Path,
    summaries_path: Option<&Path>,
    no_baselines: bool,
) -> Result<(), CliError> {
    let ctx = Context::new(global, assets, false)?;
    let rows = global.ablations()?;
    let corpus = load_corpus(corpus_path)?;
    let summaries = load_summaries(summaries_path, &ctx.config)?;
    let out = out_path(global, "report");
    let _lock = OutputLock::acquire(&out)?;
    let mut report = run_experiment_with(&corpus, &ctx.config, ctx.backend.backends(), &ctx.assets, &rows, summaries)?;
    if !no_baselines && ctx.config.baseline_runs > 0 {
        report.baselines = run_baselines(&corpus, &ctx.config, &MlpConfig::default())?;
    }
    create_dir(&out)?;
    let table = report.render_table();
    let (json_path, text_path) = (out.join("report.json"), out.join("report.txt"));
    write_json(&json_path, &report)?;
    write_text(&text_path, &table)?;
    let mut manifest = Manifest::new(
        "evaluate",
        json!({ "corpus": corpus_path, "summaries": summaries_path, "ablate": global.ablate, "baselines": !no_baselines }),
        &ctx.config,
    );
    manifest.input(corpus_path)?;
    if let Some(p) = summaries_path {
        manifest.input(p)?;
    }
    manifest.write(&out, &[&json_path, &text_path])?;
    print!("{table}");
    Ok(())
}

fn cmd_fairness(global: &GlobalArgs, report_path: &Path, corpus_path: &Path) -> Result<(), CliError> {
    let report: EvalReport = read_json(report_path)?;
    let corpus = load_corpus(corpus_path)?;
    let by_id: BTreeMap<&str, &Interview> = corpus.iter().map(|iv| (iv.id.as_str(), iv)).collect();
    let mut per_conflict = BTreeMap::new();
    for conflict in Conflict::ALL {
        let mut examples = Vec::new();
        for p in report.predictions.iter().filter(|p| p.conflict == conflict) {
            let iv = by_id
                .get(p.interview_id.as_str())
                .ok_or_else(|| CliError::Format(format!("interview {} is not in {}", p.interview_id, corpus_path.display())))?;
            let demographics = iv
                .demographics
                .as_ref()
                .ok_or_else(|| CliError::Format(format!("interview {} has no demographics", iv.id)))?;
            let truth = iv.label(conflict).ok_or_else(|| CliError::Format(format!("interview {} has no {} label", iv.id, conflict)))?;
            examples.push(CddExample {
                group: demographics.gender,
                truth,
                distribution: p.fused_distribution,
            });
        }
        if !examples.is_empty() {
            per_conflict.insert(conflict, cdd(&examples)?);
        }
    }
    let fairness = FairnessReport {
        group_definition: GROUP_DEFINITION.into(),
        per_conflict,
    };
    let row = report.rows.first().map_or("", |r| r.name.as_str());
    let out = out_path(global, "fairness");
    let _lock = OutputLock::acquire(&out)?;
    create_dir(&out)?;
    let (json_path, text_path) = (out.join("fairness.json"), out.join("fairness.txt"));
    write_json(
        &json_path,
        &FairnessFile {
            format: FAIRNESS_FORMAT,
            version: 1,
            row,
            report: &fairness,
        },
    )?;
    let table = fairness.render_table();
    write_text(&text_path, &table)?;
    let mut manifest = Manifest::new(
        "fairness",
        json!({ "report": report_path, "corpus": corpus_path }),
        &report.config,
    );
    manifest.input(report_path)?;
    manifest.input(corpus_path)?;
    manifest.write(&out, &[&json_path, &text_path])?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let assets = cli.assets.as_deref();
    match &cli.command {
        Command::Init { force } => cmd_init(g, *force),
        Command::Synth { n } => cmd_synth(g, *n),
        Command::Summarise { corpus } => cmd_summarise(g, assets, corpus),
        Command::Index { corpus } => cmd_index(g, assets, corpus.as_deref()),
        Command::TrainWeights { corpus, summaries } => cmd_train_weights(g, assets, corpus, summaries.as_deref()),
        Command::Classify { input, model, index } => cmd_classify(g, assets, input, model.as_deref(), index.as_deref()),
        Command::Evaluate {
            corpus,
            summaries,
            no_baselines,
        } => cmd_evaluate(g, assets, corpus, summaries.as_deref(), *no_baselines),
        Command::Fairness { report, corpus } => cmd_fairness(g, report, corpus),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = CliError::Usage(first.to_string());
            eprintln!("{}", err.to_json_line());
            std::process::exit(err.exit_code());
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json_line());
        std::process::exit(e.exit_code());
    }
}
