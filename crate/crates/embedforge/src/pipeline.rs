//! Config-driven pipeline runner binding the modules into reproducible
//! end-to-end workflows.
//!
//! A pipeline is a TOML file with a global `seed`, an optional `summary`
//! output path, and an ordered list of `[[step]]` tables. Every step names an
//! `op` plus its parameters; unknown keys anywhere are rejected. Randomized
//! steps derive their seed from the global seed plus the step index, and all
//! timestamps come from a clock fixed by the global seed, so rerunning an
//! identical config reproduces identical artifacts.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchTask, SimilarityMetric, TaskKind};
use crate::clock::Clock;
use crate::cooccur::{self, CooccurConfig, PairStream};
use crate::democratize::{self, AutoencoderSpec};
use crate::error::{Error, Result};
use crate::factorize::{absorb, implicit_als, truncated_svd, AlsParams};
use crate::foldin::{batch_fold_in, FoldInMatrix};
use crate::io;
use crate::model_io;
use crate::registry;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub summary: Option<PathBuf>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub name: String,
    pub op: StepOp,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOp {
    Skipgram(SkipgramStep),
    Cooccur(CooccurStep),
    Svd(SvdStep),
    Als(AlsStep),
    Foldin(FoldinStep),
    Democratize(DemocratizeStep),
    Encode(EncodeStep),
    Bench(BenchStep),
    Publish(PublishStep),
}

impl StepOp {
    pub fn op_name(&self) -> &'static str {
        match self {
            StepOp::Skipgram(_) => "skipgram",
            StepOp::Cooccur(_) => "cooccur",
            StepOp::Svd(_) => "svd",
            StepOp::Als(_) => "als",
            StepOp::Foldin(_) => "foldin",
            StepOp::Democratize(_) => "democratize",
            StepOp::Encode(_) => "encode",
            StepOp::Bench(_) => "bench",
            StepOp::Publish(_) => "publish",
        }
    }

    fn params_json(&self) -> serde_json::Value {
        match self {
            StepOp::Skipgram(p) => serde_json::to_value(p),
            StepOp::Cooccur(p) => serde_json::to_value(p),
            StepOp::Svd(p) => serde_json::to_value(p),
            StepOp::Als(p) => serde_json::to_value(p),
            StepOp::Foldin(p) => serde_json::to_value(p),
            StepOp::Democratize(p) => serde_json::to_value(p),
            StepOp::Encode(p) => serde_json::to_value(p),
            StepOp::Bench(p) => serde_json::to_value(p),
            StepOp::Publish(p) => serde_json::to_value(p),
        }
        .unwrap_or(serde_json::Value::Null)
    }

    fn inputs(&self) -> Vec<&PathBuf> {
        match self {
            StepOp::Skipgram(p) => vec![&p.corpus],
            StepOp::Cooccur(p) => vec![&p.pairs],
            StepOp::Svd(p) => vec![&p.input],
            StepOp::Als(p) => vec![&p.input],
            StepOp::Foldin(p) => vec![&p.model, &p.interactions],
            StepOp::Democratize(p) => vec![&p.input],
            StepOp::Encode(p) => vec![&p.model, &p.input],
            StepOp::Bench(p) => vec![&p.embedding, &p.suite],
            StepOp::Publish(p) => {
                let mut v = vec![&p.payload];
                if let Some(r) = &p.report {
                    v.push(r);
                }
                v
            }
        }
    }

    fn declared_output(&self) -> Option<&PathBuf> {
        match self {
            StepOp::Skipgram(p) => Some(&p.out),
            StepOp::Cooccur(p) => Some(&p.out),
            StepOp::Svd(p) => Some(&p.out),
            StepOp::Als(p) => Some(&p.out),
            StepOp::Foldin(p) => Some(&p.out),
            StepOp::Democratize(p) => Some(&p.out),
            StepOp::Encode(p) => Some(&p.out),
            StepOp::Bench(p) => Some(&p.out),
            StepOp::Publish(_) => None,
        }
    }
}

fn default_window() -> usize {
    CooccurConfig::default().window
}
fn default_min_count() -> usize {
    CooccurConfig::default().min_count
}
fn default_dim() -> usize {
    CooccurConfig::default().dim
}
fn default_negatives() -> usize {
    CooccurConfig::default().negatives
}
fn default_learning_rate() -> f64 {
    CooccurConfig::default().learning_rate
}
fn default_epochs() -> usize {
    CooccurConfig::default().epochs
}
fn default_exponent() -> f64 {
    CooccurConfig::default().exponent
}
fn default_oversample() -> usize {
    10
}
fn default_power_iters() -> usize {
    2
}
fn default_alpha() -> f64 {
    AlsParams::default().alpha
}
fn default_lambda() -> f64 {
    AlsParams::default().lambda
}
fn default_als_iters() -> usize {
    AlsParams::default().iters
}
fn default_ae_lr() -> f64 {
    0.01
}
fn default_ae_epochs() -> usize {
    100
}
fn default_ae_batch() -> usize {
    64
}
fn default_publish_kind() -> String {
    "embedding".to_owned()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipgramStep {
    pub corpus: PathBuf,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    /// Merge adjacent bigrams at or above this count before pairing.
    #[serde(default)]
    pub phrase_threshold: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CooccurStep {
    pub pairs: PathBuf,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvdStep {
    pub input: PathBuf,
    pub rank: usize,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default = "default_power_iters")]
    pub power_iters: usize,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub prune_rows: Option<usize>,
    #[serde(default)]
    pub prune_cols: Option<usize>,
    #[serde(default)]
    pub drop_cols: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlsStep {
    pub input: PathBuf,
    pub rank: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_als_iters")]
    pub iters: usize,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub prune_rows: Option<usize>,
    #[serde(default)]
    pub prune_cols: Option<usize>,
    #[serde(default)]
    pub drop_cols: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldinStep {
    pub model: PathBuf,
    pub interactions: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemocratizeStep {
    pub input: PathBuf,
    pub layers: Vec<usize>,
    #[serde(default = "default_ae_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_ae_epochs")]
    pub epochs: usize,
    #[serde(default = "default_ae_batch")]
    pub batch_size: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeStep {
    pub model: PathBuf,
    pub layer: usize,
    pub input: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchStep {
    pub embedding: PathBuf,
    pub suite: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishStep {
    pub root: PathBuf,
    /// Registry entry name the payload publishes under.
    pub entry: String,
    pub payload: PathBuf,
    #[serde(default = "default_publish_kind")]
    pub kind: String,
    #[serde(default)]
    pub report: Option<PathBuf>,
}

/// Parses a pipeline TOML string; any unknown key is a validation error.
pub fn parse_pipeline_config(text: &str) -> Result<PipelineConfig> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| Error::Validation(format!("bad TOML: {e}")))?;
    for key in table.keys() {
        if !["seed", "summary", "step"].contains(&key.as_str()) {
            return Err(Error::Validation(format!("unknown key '{key}'")));
        }
    }
    let seed = table
        .get("seed")
        .and_then(|v| v.as_integer())
        .ok_or_else(|| Error::Validation("missing integer 'seed'".into()))? as u64;
    let summary = match table.get("summary") {
        None => None,
        Some(v) => Some(PathBuf::from(v.as_str().ok_or_else(|| {
            Error::Validation("'summary' must be a path string".into())
        })?)),
    };
    let mut steps = Vec::new();
    if let Some(raw) = table.get("step") {
        let list = raw
            .as_array()
            .ok_or_else(|| Error::Validation("'step' must be an array of tables".into()))?;
        for (i, item) in list.iter().enumerate() {
            let mut t = item
                .as_table()
                .ok_or_else(|| Error::Validation(format!("step {i} is not a table")))?
                .clone();
            let name = t
                .remove("name")
                .and_then(|v| v.as_str().map(str::to_owned))
                .ok_or_else(|| Error::Validation(format!("step {i} is missing 'name'")))?;
            let op_name = t
                .remove("op")
                .and_then(|v| v.as_str().map(str::to_owned))
                .ok_or_else(|| Error::Validation(format!("step '{name}' is missing 'op'")))?;
            let rest = toml::Value::Table(t);
            let step_err = |e: toml::de::Error| {
                Error::Validation(format!("step '{name}': {}", e.message()))
            };
            let op = match op_name.as_str() {
                "skipgram" => StepOp::Skipgram(rest.try_into().map_err(step_err)?),
                "cooccur" => StepOp::Cooccur(rest.try_into().map_err(step_err)?),
                "svd" => StepOp::Svd(rest.try_into().map_err(step_err)?),
                "als" => StepOp::Als(rest.try_into().map_err(step_err)?),
                "foldin" => StepOp::Foldin(rest.try_into().map_err(step_err)?),
                "democratize" => StepOp::Democratize(rest.try_into().map_err(step_err)?),
                "encode" => StepOp::Encode(rest.try_into().map_err(step_err)?),
                "bench" => StepOp::Bench(rest.try_into().map_err(step_err)?),
                "publish" => StepOp::Publish(rest.try_into().map_err(step_err)?),
                other => {
                    return Err(Error::Validation(format!(
                        "step '{name}': unknown op '{other}'"
                    )))
                }
            };
            steps.push(Step { name, op });
        }
    }
    Ok(PipelineConfig {
        seed,
        summary,
        steps,
    })
}

pub fn load_pipeline_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pipeline_config(&text)
}

/// Checks step-name uniqueness and that every referenced input either exists
/// on disk or is produced by an earlier step.
pub fn validate_pipeline(config: &PipelineConfig, base: &Path) -> Result<()> {
    let mut names = HashSet::new();
    let mut produced: HashSet<PathBuf> = HashSet::new();
    for step in &config.steps {
        if !names.insert(step.name.clone()) {
            return Err(Error::Validation(format!(
                "duplicate step name '{}'",
                step.name
            )));
        }
        for input in step.op.inputs() {
            let resolved = resolve(base, input);
            // a produced output directory satisfies any path inside it
            let satisfied = resolved.exists()
                || produced.iter().any(|p| resolved.starts_with(p));
            if !satisfied {
                return Err(Error::Validation(format!(
                    "step '{}': input '{}' does not exist and is not produced by an earlier step",
                    step.name,
                    input.display()
                )));
            }
        }
        if let Some(out) = step.op.declared_output() {
            produced.insert(resolve(base, out));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSummary {
    pub name: String,
    pub op: String,
    pub params: serde_json::Value,
    pub duration_ms: u64,
    pub outputs: Vec<ArtifactDigest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    /// "success", "failed", or "plan" for dry runs.
    pub status: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failed_step: Option<String>,
    pub steps: Vec<StepSummary>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub dry_run: bool,
    pub workers: usize,
    /// Directory relative paths resolve against (usually the config file's).
    pub base: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            dry_run: false,
            workers: 1,
            base: PathBuf::from("."),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

/// Runs the pipeline. Steps execute in order; a failing step halts the run,
/// leaves earlier artifacts in place, and is named in the summary and the
/// returned error. When a summary path is configured the summary is written
/// on both success and failure. `dry_run` validates and returns the plan
/// without touching any output.
pub fn run_pipeline(config: &PipelineConfig, options: &RunOptions) -> Result<RunSummary> {
    validate_pipeline(config, &options.base)?;
    if options.dry_run {
        return Ok(RunSummary {
            status: "plan".into(),
            seed: config.seed,
            failed_step: None,
            steps: config
                .steps
                .iter()
                .map(|s| StepSummary {
                    name: s.name.clone(),
                    op: s.op.op_name().to_owned(),
                    params: s.op.params_json(),
                    duration_ms: 0,
                    outputs: vec![],
                })
                .collect(),
        });
    }

    let clock = Clock::fixed_from_seed(config.seed);
    let mut summary = RunSummary {
        status: "success".into(),
        seed: config.seed,
        failed_step: None,
        steps: Vec::with_capacity(config.steps.len()),
    };
    for (index, step) in config.steps.iter().enumerate() {
        let ctx = StepContext {
            seed: config.seed.wrapping_add(index as u64),
            workers: options.workers.max(1),
            base: options.base.clone(),
            clock: clock.clone(),
        };
        log::info!(
            "step '{}' ({}) starting, seed {}",
            step.name,
            step.op.op_name(),
            ctx.seed
        );
        let started = Instant::now();
        let result = execute_op(&step.op, &ctx);
        let duration_ms = started.elapsed().as_millis() as u64;
        match result {
            Ok(outputs) => {
                let mut digests = Vec::with_capacity(outputs.len());
                for path in outputs {
                    digests.push(ArtifactDigest {
                        sha256: io::sha256_file(&path)?,
                        path: path.display().to_string(),
                    });
                }
                log::info!(
                    "step '{}' finished in {duration_ms} ms ({} artifacts)",
                    step.name,
                    digests.len()
                );
                summary.steps.push(StepSummary {
                    name: step.name.clone(),
                    op: step.op.op_name().to_owned(),
                    params: step.op.params_json(),
                    duration_ms,
                    outputs: digests,
                });
            }
            Err(e) => {
                log::error!("step '{}' failed after {duration_ms} ms: {e}", step.name);
                summary.status = "failed".into();
                summary.failed_step = Some(step.name.clone());
                summary.steps.push(StepSummary {
                    name: step.name.clone(),
                    op: step.op.op_name().to_owned(),
                    params: step.op.params_json(),
                    duration_ms,
                    outputs: vec![],
                });
                write_summary(config, options, &summary)?;
                return Err(Error::StepFailed {
                    step: step.name.clone(),
                    source: Box::new(e),
                });
            }
        }
    }
    write_summary(config, options, &summary)?;
    Ok(summary)
}

fn write_summary(
    config: &PipelineConfig,
    options: &RunOptions,
    summary: &RunSummary,
) -> Result<()> {
    if let Some(path) = &config.summary {
        let path = resolve(&options.base, path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        model_io::write_json(&path, summary)?;
    }
    Ok(())
}

/// Everything a step needs besides its own parameters.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub seed: u64,
    pub workers: usize,
    pub base: PathBuf,
    pub clock: Clock,
}

impl StepContext {
    pub fn new(seed: u64, workers: usize, base: PathBuf, clock: Clock) -> Self {
        Self {
            seed,
            workers,
            base,
            clock,
        }
    }

    fn path(&self, p: &Path) -> PathBuf {
        resolve(&self.base, p)
    }
}

fn model_dir_outputs(dir: &Path) -> Vec<PathBuf> {
    vec![
        dir.join(model_io::LEFT_FILE),
        dir.join(model_io::RIGHT_FILE),
        dir.join(model_io::MANIFEST_FILE),
    ]
}

/// Executes one operation, returning the files it wrote.
pub fn execute_op(op: &StepOp, ctx: &StepContext) -> Result<Vec<PathBuf>> {
    match op {
        StepOp::Skipgram(p) => {
            let corpus = io::read_corpus(&ctx.path(&p.corpus))?;
            let corpus = match p.phrase_threshold {
                Some(t) => cooccur::merge_phrases(&corpus, t),
                None => corpus,
            };
            let stream = cooccur::skipgram_pairs(&corpus, p.window, p.min_count)?;
            let records: Vec<(String, String, f64)> = stream
                .pairs()
                .iter()
                .map(|&(l, r, w)| {
                    (
                        stream.left_vocab().key(l).unwrap().to_owned(),
                        stream.right_vocab().key(r).unwrap().to_owned(),
                        w,
                    )
                })
                .collect();
            let out = ctx.path(&p.out);
            io::write_interactions(&out, &records)?;
            Ok(vec![out])
        }
        StepOp::Cooccur(p) => {
            let records = io::read_interactions(&ctx.path(&p.pairs))?;
            let stream = PairStream::from_records(&records)?;
            let config = CooccurConfig {
                dim: p.dim,
                negatives: p.negatives,
                learning_rate: p.learning_rate,
                epochs: p.epochs,
                exponent: p.exponent,
                seed: ctx.seed,
                min_count: p.min_count,
                window: default_window(),
            };
            let (left, right) = cooccur::train_with_workers(&stream, &config, ctx.workers)?;
            let out = ctx.path(&p.out);
            let input_digest = io::sha256_file(&ctx.path(&p.pairs))?;
            model_io::save_embedding_pair(
                &out,
                "cooccur",
                &left,
                &right,
                ctx.seed,
                Some(input_digest),
                serde_json::json!({
                    "dim": p.dim,
                    "negatives": p.negatives,
                    "learning_rate": p.learning_rate,
                    "epochs": p.epochs,
                    "exponent": p.exponent,
                    "min_count": p.min_count,
                }),
                &ctx.clock,
            )?;
            Ok(model_dir_outputs(&out))
        }
        StepOp::Svd(p) => {
            let input = ctx.path(&p.input);
            let matrix = prepared_matrix(
                &input,
                p.prune_rows,
                p.prune_cols,
                p.drop_cols,
                p.normalize,
            )?;
            let svd = truncated_svd(&matrix, p.rank, p.oversample, p.power_iters, ctx.seed)?;
            if svd.is_rank_deficient() {
                log::warn!(
                    "requested rank {} but matrix rank is {}",
                    p.rank,
                    svd.rank()
                );
            }
            let model = absorb(&svd)?;
            let out = ctx.path(&p.out);
            model_io::save_model(
                &out,
                &model,
                ctx.seed,
                Some(io::sha256_file(&input)?),
                serde_json::json!({
                    "rank": p.rank,
                    "oversample": p.oversample,
                    "power_iters": p.power_iters,
                    "normalize": p.normalize,
                    "prune_rows": p.prune_rows,
                    "prune_cols": p.prune_cols,
                    "drop_cols": p.drop_cols,
                }),
                &ctx.clock,
            )?;
            Ok(model_dir_outputs(&out))
        }
        StepOp::Als(p) => {
            let input = ctx.path(&p.input);
            let matrix = prepared_matrix(
                &input,
                p.prune_rows,
                p.prune_cols,
                p.drop_cols,
                p.normalize,
            )?;
            let model = implicit_als(
                &matrix,
                AlsParams {
                    rank: p.rank,
                    alpha: p.alpha,
                    lambda: p.lambda,
                    iters: p.iters,
                    seed: ctx.seed,
                },
            )?;
            let out = ctx.path(&p.out);
            model_io::save_model(
                &out,
                &model,
                ctx.seed,
                Some(io::sha256_file(&input)?),
                serde_json::json!({
                    "rank": p.rank,
                    "alpha": p.alpha,
                    "lambda": p.lambda,
                    "iters": p.iters,
                    "normalize": p.normalize,
                    "prune_rows": p.prune_rows,
                    "prune_cols": p.prune_cols,
                    "drop_cols": p.drop_cols,
                }),
                &ctx.clock,
            )?;
            Ok(model_dir_outputs(&out))
        }
        StepOp::Foldin(p) => {
            let (model, _) = model_io::load_model(&ctx.path(&p.model))?;
            let fold = FoldInMatrix::from_model(&model)?;
            let interactions = io::read_interactions(&ctx.path(&p.interactions))?;
            let outcome = batch_fold_in(&interactions, &fold);
            if outcome.unknown_items > 0 {
                log::warn!("{} interactions referenced unknown items", outcome.unknown_items);
            }
            let out = ctx.path(&p.out);
            io::write_embedding_auto(&out, &outcome.embeddings)?;
            Ok(vec![out])
        }
        StepOp::Democratize(p) => {
            let data = io::read_embedding_auto(&ctx.path(&p.input))?;
            let spec = AutoencoderSpec {
                layer_dims: p.layers.clone(),
                learning_rate: p.learning_rate,
                epochs: p.epochs,
                batch_size: p.batch_size,
                seed: ctx.seed,
            };
            let model = democratize::train_autoencoder(&data, &spec)?;
            let out = ctx.path(&p.out);
            model_io::save_autoencoder(&out, &model, &spec, &ctx.clock)?;
            let mut outputs = vec![out.join(model_io::MANIFEST_FILE)];
            for i in 0..model.encoder.len() {
                outputs.push(out.join(format!("enc_{i}.bin")));
                outputs.push(out.join(format!("dec_{i}.bin")));
            }
            Ok(outputs)
        }
        StepOp::Encode(p) => {
            let model = model_io::load_autoencoder(&ctx.path(&p.model))?;
            let emb = io::read_embedding_auto(&ctx.path(&p.input))?;
            let compressed = democratize::compress_embedding(&model, &emb, p.layer)?;
            let out = ctx.path(&p.out);
            io::write_embedding_auto(&out, &compressed)?;
            Ok(vec![out])
        }
        StepOp::Bench(p) => {
            let emb_path = ctx.path(&p.embedding);
            let emb = io::read_embedding_auto(&emb_path)?;
            let (suite_seed, tasks) = load_suite(&ctx.path(&p.suite))?;
            let seed = suite_seed.unwrap_or(ctx.seed);
            let name = emb_path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("embedding")
                .to_owned();
            let report = crate::bench::run_suite(&name, &emb, &tasks, seed, &ctx.clock);
            let out = ctx.path(&p.out);
            model_io::write_json(&out, &report)?;
            Ok(vec![out])
        }
        StepOp::Publish(p) => {
            let payload = std::fs::read(ctx.path(&p.payload))
                .map_err(|e| Error::io(ctx.path(&p.payload), e))?;
            let (dim, count) = sniff_embedding_header(&payload).unwrap_or((0, 0));
            let report = match &p.report {
                Some(path) => Some(model_io::read_json::<crate::bench::BenchmarkReport>(
                    &ctx.path(path),
                )?),
                None => None,
            };
            let entry = registry::publish(
                &ctx.path(&p.root),
                &p.entry,
                &payload,
                &registry::PublishManifest {
                    kind: p.kind.clone(),
                    dim,
                    count,
                    seed: ctx.seed,
                    hyperparameters: serde_json::Value::Null,
                },
                report.as_ref(),
                &ctx.clock,
            )?;
            let dir = entry.dir(&ctx.path(&p.root));
            let mut outputs = vec![dir.join("payload.bin"), dir.join("manifest.json")];
            if entry.has_report {
                outputs.push(dir.join("report.json"));
            }
            Ok(outputs)
        }
    }
}

fn prepared_matrix(
    input: &Path,
    prune_rows: Option<usize>,
    prune_cols: Option<usize>,
    drop_cols: Option<usize>,
    normalize: bool,
) -> Result<crate::matrix::SparseInteractionMatrix> {
    let mut matrix = io::read_interaction_matrix(input)?;
    if let Some(n) = prune_rows {
        matrix = matrix.prune_top_rows(n)?;
    }
    if let Some(n) = prune_cols {
        matrix = matrix.prune_top_cols(n)?;
    }
    if let Some(n) = drop_cols {
        matrix = matrix.drop_top_cols(n);
    }
    if normalize {
        matrix = matrix.normalize();
    }
    Ok(matrix)
}

/// (dim, count) from an embedding binary header, when the payload is one.
fn sniff_embedding_header(payload: &[u8]) -> Option<(usize, usize)> {
    if payload.len() < 16 || &payload[..4] != b"EMB1" {
        return None;
    }
    let dim = u32::from_le_bytes(payload[4..8].try_into().ok()?) as usize;
    let count = u64::from_le_bytes(payload[8..16].try_into().ok()?) as usize;
    Some((dim, count))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default, rename = "task")]
    tasks: Vec<SuiteTaskEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteTaskEntry {
    name: String,
    kind: String,
    labels: Option<PathBuf>,
    follows: Option<PathBuf>,
    pairs: Option<PathBuf>,
    metric: Option<String>,
    l2: Option<f64>,
    iters: Option<usize>,
}

/// Default probe protocol: l2 = 1e-4, 500 iterations, held-out ROC-AUC.
const PROBE_L2: f64 = 1e-4;
const PROBE_ITERS: usize = 500;

/// Loads a benchmark suite TOML; dataset paths resolve relative to the suite
/// file's directory.
pub fn load_suite(path: &Path) -> Result<(Option<u64>, Vec<BenchTask>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let suite: SuiteFile =
        toml::from_str(&text).map_err(|e| Error::Validation(format!("bad suite file: {e}")))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut tasks = Vec::with_capacity(suite.tasks.len());
    for entry in suite.tasks {
        let need = |field: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
            field.as_ref().map(|p| resolve(base, p)).ok_or_else(|| {
                Error::Validation(format!("task '{}' needs '{what}'", entry.name))
            })
        };
        let (kind, digest) = match entry.kind.as_str() {
            "probe" => {
                let labels_path = need(&entry.labels, "labels")?;
                let labels = read_two_columns(&labels_path)?;
                let digest = io::sha256_file(&labels_path)?;
                (
                    TaskKind::Probe {
                        labels,
                        l2: entry.l2.unwrap_or(PROBE_L2),
                        iters: entry.iters.unwrap_or(PROBE_ITERS),
                    },
                    digest,
                )
            }
            "follow_jaccard" => {
                let follows_path = need(&entry.follows, "follows")?;
                let pairs_path = need(&entry.pairs, "pairs")?;
                let mut follows: HashMap<String, HashSet<String>> = HashMap::new();
                for (user, followed) in read_two_columns(&follows_path)? {
                    follows.entry(user).or_default().insert(followed);
                }
                let pairs = read_two_columns(&pairs_path)?;
                let metric: SimilarityMetric =
                    entry.metric.as_deref().unwrap_or("cosine").parse()?;
                let digest = io::sha256_hex(
                    format!(
                        "{}{}",
                        io::sha256_file(&follows_path)?,
                        io::sha256_file(&pairs_path)?
                    )
                    .as_bytes(),
                );
                (
                    TaskKind::FollowJaccard {
                        follows,
                        pairs,
                        metric,
                    },
                    digest,
                )
            }
            other => {
                return Err(Error::Validation(format!(
                    "task '{}': unknown kind '{other}'",
                    entry.name
                )))
            }
        };
        tasks.push(BenchTask {
            name: entry.name,
            kind,
            dataset_digest: digest,
        });
    }
    Ok((suite.seed, tasks))
}

/// Reads `a \t b` records, skipping blanks and '#' comments.
pub fn read_two_columns(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let a = fields.next().filter(|s| !s.is_empty());
        let b = fields.next().filter(|s| !s.is_empty());
        match (a, b) {
            (Some(a), Some(b)) => out.push((a.to_owned(), b.to_owned())),
            _ => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    message: "expected two tab-separated fields".into(),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_key_is_rejected_by_name() {
        let err = parse_pipeline_config("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn unknown_step_key_is_rejected_by_name() {
        let text = r#"
seed = 1
[[step]]
name = "pairs"
op = "skipgram"
corpus = "c.txt"
out = "pairs.tsv"
window_size = 5
"#;
        let err = parse_pipeline_config(text).unwrap_err();
        assert!(err.to_string().contains("window_size"), "{err}");
    }

    #[test]
    fn missing_seed_is_rejected() {
        assert!(parse_pipeline_config("").is_err());
    }

    #[test]
    fn duplicate_step_names_are_rejected() {
        let text = r#"
seed = 1
[[step]]
name = "s"
op = "skipgram"
corpus = "c.txt"
out = "a.tsv"
[[step]]
name = "s"
op = "skipgram"
corpus = "c.txt"
out = "b.tsv"
"#;
        let config = parse_pipeline_config(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.txt"), "a b\n").unwrap();
        let err = validate_pipeline(&config, dir.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn missing_inputs_fail_validation_but_produced_ones_pass() {
        let text = r#"
seed = 1
[[step]]
name = "pairs"
op = "skipgram"
corpus = "c.txt"
out = "pairs.tsv"
[[step]]
name = "train"
op = "cooccur"
pairs = "pairs.tsv"
dim = 4
out = "model"
"#;
        let config = parse_pipeline_config(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        // corpus missing: validation names the step and path
        let err = validate_pipeline(&config, dir.path()).unwrap_err();
        assert!(err.to_string().contains("c.txt"), "{err}");
        // with the corpus present, pairs.tsv is satisfied by the first step
        std::fs::write(dir.path().join("c.txt"), "a b a b\n").unwrap();
        validate_pipeline(&config, dir.path()).unwrap();
    }

    #[test]
    fn empty_pipeline_succeeds_with_no_artifacts() {
        let config = parse_pipeline_config("seed = 3\n").unwrap();
        let summary = run_pipeline(&config, &RunOptions::default()).unwrap();
        assert_eq!(summary.status, "success");
        assert!(summary.steps.is_empty());
    }

    #[test]
    fn dry_run_reports_plan_without_outputs() {
        let text = r#"
seed = 1
[[step]]
name = "pairs"
op = "skipgram"
corpus = "c.txt"
out = "pairs.tsv"
"#;
        let config = parse_pipeline_config(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.txt"), "a b\n").unwrap();
        let options = RunOptions {
            dry_run: true,
            workers: 1,
            base: dir.path().to_owned(),
        };
        let summary = run_pipeline(&config, &options).unwrap();
        assert_eq!(summary.status, "plan");
        assert_eq!(summary.steps.len(), 1);
        assert!(!dir.path().join("pairs.tsv").exists());
    }

    #[test]
    fn two_column_reader_validates_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tsv");
        std::fs::write(&path, "# c\na\tb\nbroken\n").unwrap();
        let err = read_two_columns(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn header_sniffing() {
        assert_eq!(sniff_embedding_header(b"nope"), None);
        let mut buf = b"EMB1".to_vec();
        buf.extend(7u32.to_le_bytes());
        buf.extend(42u64.to_le_bytes());
        assert_eq!(sniff_embedding_header(&buf), Some((7, 42)));
    }
}
