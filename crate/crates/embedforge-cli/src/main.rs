//! embedforge: train, fold-in, compress, benchmark, and version entity
//! embeddings from sparse interaction data.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use embedforge::clock::Clock;
use embedforge::cooccur::{self, CooccurConfig};
use embedforge::error::Error;
use embedforge::foldin::{
    lookalike_features, run_foldin_experiment, FoldInExperimentParams, LookalikeGroups,
};
use embedforge::pipeline::{
    self, AlsStep, CooccurStep, DemocratizeStep, EncodeStep, FoldinStep, PublishStep, RunOptions,
    StepContext, StepOp, SvdStep,
};
use embedforge::{io as efio, model_io, registry};

#[derive(Parser)]
#[command(name = "embedforge", version, about)]
struct Cli {
    /// Worker threads for training steps (1 = deterministic).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Truncated SVD co-embeddings from an interaction file.
    Svd(SvdArgs),
    /// Implicit-feedback ALS co-embeddings from an interaction file.
    Als(AlsArgs),
    /// Negative-sampling co-embeddings from a pair stream.
    Cooccur(CooccurArgs),
    /// Skipgram embeddings straight from a tokenized corpus.
    Skipgram(SkipgramArgs),
    /// Fold new entities into a frozen factorization model.
    Foldin(FoldinArgs),
    /// Quantile similarity features for entities with no interactions.
    Lookalike(LookalikeArgs),
    /// Experiment protocols.
    Experiment(ExperimentArgs),
    /// Train a compressing autoencoder over an embedding.
    Democratize(DemocratizeArgs),
    /// Read a lower-dimensional representation off an encoder layer.
    Encode(EncodeArgs),
    /// Run a benchmark suite against an embedding.
    Bench(BenchArgs),
    /// Versioned embedding store.
    Registry(RegistryArgs),
    /// Run a pipeline config end to end.
    Run(RunArgs),
}

#[derive(Args)]
struct SvdArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 10)]
    oversample: usize,
    #[arg(long, default_value_t = 2)]
    power_iters: usize,
    /// Scale entries by sqrt(row sum) * sqrt(col sum) before factorizing.
    #[arg(long)]
    normalize: bool,
    /// Keep only the N heaviest rows.
    #[arg(long)]
    prune_rows: Option<usize>,
    /// Keep only the N heaviest columns.
    #[arg(long)]
    prune_cols: Option<usize>,
    /// Drop the N heaviest columns (mostly-uninformative popular items).
    #[arg(long)]
    drop_cols: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 40.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 15)]
    iters: usize,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    prune_rows: Option<usize>,
    #[arg(long)]
    prune_cols: Option<usize>,
    #[arg(long)]
    drop_cols: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CooccurArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long = "lr", default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.75)]
    exponent: f64,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SkipgramArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    /// Merge adjacent bigrams occurring at least this often before pairing.
    #[arg(long)]
    phrase_threshold: Option<usize>,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long = "lr", default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.75)]
    exponent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the generated pairs as TSV.
    #[arg(long)]
    pairs_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FoldinArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    interactions: PathBuf,
    /// Output embedding; .tsv/.txt for text, anything else binary.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LookalikeArgs {
    #[arg(long)]
    model: PathBuf,
    /// TSV of group_name \t member_key rows; members index the left (user)
    /// table.
    #[arg(long)]
    groups: PathBuf,
    /// Candidate keys (first column), indexing the right (producer) table.
    #[arg(long)]
    candidates: PathBuf,
    /// Comma-separated quantiles in [0,1], e.g. 0,0.5,1.
    #[arg(long, default_value = "0,0.5,1")]
    quantiles: String,
    /// Output TSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(subcommand)]
    which: ExperimentCommand,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Train-versus-fold NDCG across activity cutoffs.
    Foldin(FoldinExperimentArgs),
}

#[derive(Args)]
struct FoldinExperimentArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated percentages in (0,100], e.g. 20,40,60,80,100.
    #[arg(long, default_value = "20,40,60,80,100")]
    percents: String,
    #[arg(long, default_value_t = 4)]
    rank: usize,
    #[arg(long, default_value_t = 40.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output table (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemocratizeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated layer widths from input to bottleneck, strictly
    /// decreasing, e.g. 1000,500,200,100,50.
    #[arg(long)]
    layers: String,
    #[arg(long = "lr", default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    layer: usize,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the suite seed (and the default of 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RegistryArgs {
    #[command(subcommand)]
    which: RegistryCommand,
}

#[derive(Subcommand)]
enum RegistryCommand {
    /// Publish a payload as the next version of a named embedding.
    Publish {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        payload: PathBuf,
        #[arg(long, default_value = "embedding")]
        kind: String,
        /// Attach a benchmark report (report.json).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fetch a version ("latest" or a number) to a file.
    Fetch {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "latest")]
        version: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// List entries, optionally for one name.
    List {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Validate and print the plan without executing.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let workers = cli.workers;
    match dispatch(cli.command, workers) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn system_ctx(seed: u64, workers: usize) -> StepContext {
    StepContext::new(seed, workers, PathBuf::from("."), Clock::System)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>> {
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| anyhow::anyhow!("bad {what} value '{p}'"))
        })
        .collect()
}

fn dispatch(command: Command, workers: usize) -> anyhow::Result<ExitCode> {
    match command {
        Command::Svd(a) => {
            let op = StepOp::Svd(SvdStep {
                input: a.input,
                rank: a.rank,
                oversample: a.oversample,
                power_iters: a.power_iters,
                normalize: a.normalize,
                prune_rows: a.prune_rows,
                prune_cols: a.prune_cols,
                drop_cols: a.drop_cols,
                out: a.out,
            });
            pipeline::execute_op(&op, &system_ctx(a.seed, workers))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Als(a) => {
            let op = StepOp::Als(AlsStep {
                input: a.input,
                rank: a.rank,
                alpha: a.alpha,
                lambda: a.lambda,
                iters: a.iters,
                normalize: a.normalize,
                prune_rows: a.prune_rows,
                prune_cols: a.prune_cols,
                drop_cols: a.drop_cols,
                out: a.out,
            });
            pipeline::execute_op(&op, &system_ctx(a.seed, workers))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Cooccur(a) => {
            let op = StepOp::Cooccur(CooccurStep {
                pairs: a.pairs,
                dim: a.dim,
                negatives: a.negatives,
                learning_rate: a.learning_rate,
                epochs: a.epochs,
                exponent: a.exponent,
                min_count: a.min_count,
                out: a.out,
            });
            pipeline::execute_op(&op, &system_ctx(a.seed, workers))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Skipgram(a) => {
            let corpus = efio::read_corpus(&a.corpus)?;
            let corpus = match a.phrase_threshold {
                Some(t) => cooccur::merge_phrases(&corpus, t),
                None => corpus,
            };
            let stream = cooccur::skipgram_pairs(&corpus, a.window, a.min_count)?;
            if let Some(pairs_out) = &a.pairs_out {
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
                efio::write_interactions(pairs_out, &records)?;
            }
            let config = CooccurConfig {
                dim: a.dim,
                negatives: a.negatives,
                learning_rate: a.learning_rate,
                epochs: a.epochs,
                exponent: a.exponent,
                seed: a.seed,
                min_count: 1, // already filtered during pairing
                window: a.window,
            };
            let (left, right) = cooccur::train_with_workers(&stream, &config, workers)?;
            let input_digest = efio::sha256_file(&a.corpus)?;
            model_io::save_embedding_pair(
                &a.out,
                "cooccur",
                &left,
                &right,
                a.seed,
                Some(input_digest),
                serde_json::json!({
                    "dim": a.dim,
                    "negatives": a.negatives,
                    "learning_rate": a.learning_rate,
                    "epochs": a.epochs,
                    "exponent": a.exponent,
                    "window": a.window,
                    "min_count": a.min_count,
                    "phrase_threshold": a.phrase_threshold,
                }),
                &Clock::System,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Foldin(a) => {
            let op = StepOp::Foldin(FoldinStep {
                model: a.model,
                interactions: a.interactions,
                out: a.out,
            });
            pipeline::execute_op(&op, &system_ctx(0, workers))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Lookalike(a) => {
            run_lookalike(a)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment(a) => match a.which {
            ExperimentCommand::Foldin(e) => {
                run_experiment(e)?;
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Democratize(a) => {
            let layers = parse_list::<usize>(&a.layers, "layer width")?;
            let op = StepOp::Democratize(DemocratizeStep {
                input: a.input,
                layers,
                learning_rate: a.learning_rate,
                epochs: a.epochs,
                batch_size: a.batch_size,
                out: a.out,
            });
            pipeline::execute_op(&op, &system_ctx(a.seed, workers))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Encode(a) => {
            let op = StepOp::Encode(EncodeStep {
                model: a.model,
                layer: a.layer,
                input: a.input,
                out: a.out,
            });
            pipeline::execute_op(&op, &system_ctx(0, workers))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench(a) => {
            let emb = efio::read_embedding_auto(&a.embedding)?;
            let (suite_seed, tasks) = pipeline::load_suite(&a.suite)?;
            let seed = a.seed.or(suite_seed).unwrap_or(0);
            let name = a
                .embedding
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("embedding")
                .to_owned();
            let report = embedforge::bench::run_suite(&name, &emb, &tasks, seed, &Clock::System);
            model_io::write_json(&a.out, &report)?;
            for row in &report.rows {
                match (&row.value, &row.error) {
                    (Some(v), _) => println!("{}\t{}\t{v:.6}", row.task, row.metric),
                    (None, Some(e)) => println!("{}\t{}\tFAILED: {e}", row.task, row.metric),
                    _ => {}
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Registry(a) => {
            run_registry(a.which)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(a) => run_pipeline_command(a, workers),
    }
}

fn run_lookalike(a: LookalikeArgs) -> anyhow::Result<()> {
    let (model, _) = model_io::load_model(&a.model)?;
    let quantiles = parse_list::<f64>(&a.quantiles, "quantile")?;

    // one group per distinct name, in first-seen order, rows may interleave
    let mut grouped: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut missing_members = 0usize;
    for (group, member) in pipeline::read_two_columns(&a.groups)? {
        let slot = *index.entry(group.clone()).or_insert_with(|| {
            grouped.push((group, Vec::new()));
            grouped.len() - 1
        });
        match model.left_star.lookup(&member) {
            Some(v) => grouped[slot].1.push(v.to_vec()),
            None => missing_members += 1,
        }
    }
    if missing_members > 0 {
        log::warn!("{missing_members} group members missing from the user table");
    }
    let mut groups = LookalikeGroups::new();
    for (name, members) in grouped {
        groups.add_group(&name, members)?;
    }
    if groups.is_empty() {
        bail!("groups file defined no groups");
    }

    let mut out: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(std::fs::File::create(path).context("create output")?),
        None => Box::new(std::io::stdout().lock()),
    };
    let candidates = pipeline::read_two_columns(&a.candidates).or_else(|_| {
        // single-column candidate lists are fine too
        let text = std::fs::read_to_string(&a.candidates)?;
        Ok::<_, anyhow::Error>(
            text.lines()
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| {
                    let key = l.split('\t').next().unwrap_or(l);
                    (key.to_owned(), String::new())
                })
                .collect(),
        )
    })?;
    let mut missing_candidates = 0usize;
    for (candidate, _) in candidates {
        let Some(v) = model.right_star.lookup(&candidate) else {
            missing_candidates += 1;
            continue;
        };
        let features = lookalike_features(v, &groups, &quantiles)?;
        write!(out, "{candidate}")?;
        for f in features {
            write!(out, "\t{f:.8e}")?;
        }
        writeln!(out)?;
    }
    if missing_candidates > 0 {
        log::warn!("{missing_candidates} candidates missing from the producer table");
    }
    Ok(())
}

fn run_experiment(e: FoldinExperimentArgs) -> anyhow::Result<()> {
    let matrix = efio::read_interaction_matrix(&e.input)?;
    let percents = parse_list::<f64>(&e.percents, "percent")?;
    let rows = run_foldin_experiment(
        &matrix,
        &FoldInExperimentParams {
            percents,
            rank: e.rank,
            alpha: e.alpha,
            lambda: e.lambda,
            iters: e.iters,
            split_ratio: e.split,
            seed: e.seed,
        },
    )?;
    let mut out: Box<dyn Write> = match &e.out {
        Some(path) => Box::new(std::fs::File::create(path).context("create output")?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(
        out,
        "# percent\tndcg_trained\tndcg_folded\tn_trained\tn_folded\tn_excluded"
    )?;
    let fmt = |v: Option<f64>| v.map_or("NA".to_owned(), |x| format!("{x:.6}"));
    for row in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            row.percent,
            fmt(row.ndcg_trained),
            fmt(row.ndcg_folded),
            row.n_trained,
            row.n_folded,
            row.n_excluded
        )?;
    }
    Ok(())
}

fn run_registry(cmd: RegistryCommand) -> anyhow::Result<()> {
    match cmd {
        RegistryCommand::Publish {
            root,
            name,
            payload,
            kind,
            report,
            seed,
        } => {
            let op = StepOp::Publish(PublishStep {
                root,
                entry: name,
                payload,
                kind,
                report,
            });
            let outputs = pipeline::execute_op(&op, &system_ctx(seed, 1))?;
            for path in outputs {
                println!("{}", path.display());
            }
        }
        RegistryCommand::Fetch {
            root,
            name,
            version,
            out,
        } => {
            let spec: registry::VersionSpec = version.parse::<registry::VersionSpec>()?;
            let (payload, entry) = registry::fetch(&root, &name, spec)?;
            std::fs::write(&out, payload).context("write payload")?;
            println!(
                "{} v{} ({} bytes, digest {})",
                entry.name,
                entry.version,
                entry.manifest.count,
                &entry.digest[..12]
            );
        }
        RegistryCommand::List { root, name } => {
            let entries = registry::list_entries(&root, name.as_deref())?;
            for e in entries {
                println!(
                    "{}\tv{}\t{}\t{}\tdim={}\tcount={}\t{}",
                    e.name,
                    e.version,
                    e.created_at,
                    e.manifest.kind,
                    e.manifest.dim,
                    e.manifest.count,
                    &e.digest[..12]
                );
            }
        }
    }
    Ok(())
}

fn run_pipeline_command(a: RunArgs, workers: usize) -> anyhow::Result<ExitCode> {
    let config = match pipeline::load_pipeline_config(&a.config) {
        Ok(c) => c,
        Err(e @ Error::Validation(_)) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e.into()),
    };
    let base = a
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let options = RunOptions {
        dry_run: a.dry_run,
        workers,
        base,
    };
    match pipeline::run_pipeline(&config, &options) {
        Ok(summary) => {
            if a.dry_run {
                println!("plan: {} steps (seed {})", summary.steps.len(), summary.seed);
                for s in &summary.steps {
                    println!("  {} ({}): {}", s.name, s.op, s.params);
                }
            } else {
                println!("success: {} steps", summary.steps.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ Error::Validation(_)) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(1))
        }
        Err(e @ Error::StepFailed { .. }) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}
