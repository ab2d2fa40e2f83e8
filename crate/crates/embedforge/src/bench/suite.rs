//! Benchmark suite execution and the published report format.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{follow_jaccard_task, roc_auc, train_probe, SimilarityMetric};
use crate::clock::Clock;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// A benchmark task with its in-memory dataset.
#[derive(Debug, Clone)]
pub struct BenchTask {
    pub name: String,
    pub kind: TaskKind,
    /// Digest of the dataset the task was loaded from.
    pub dataset_digest: String,
}

#[derive(Debug, Clone)]
pub enum TaskKind {
    /// Logistic-regression probe from embedding rows to class labels
    /// (entity key -> label). Two classes give a single ROC-AUC; more give
    /// macro-averaged one-vs-rest.
    Probe {
        labels: Vec<(String, String)>,
        l2: f64,
        iters: usize,
    },
    /// Rank correlation between embedding similarity and follow-set Jaccard.
    FollowJaccard {
        follows: HashMap<String, HashSet<String>>,
        pairs: Vec<(String, String)>,
        metric: SimilarityMetric,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: String,
    pub metric: String,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub dataset_digest: String,
    pub timestamp: String,
}

/// Named metric results attached to a published embedding version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub embedding: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fraction of samples in the probe train split.
const TRAIN_FRACTION: f64 = 0.8;

/// Runs every configured task against the embedding, one report row per
/// task in task order. Task failures are recorded in the row and the suite
/// continues. Each task derives its own seed from the suite seed and its
/// index, so tasks are independent and reproducible.
pub fn run_suite(
    embedding_name: &str,
    emb: &EmbeddingMatrix,
    tasks: &[BenchTask],
    seed: u64,
    clock: &Clock,
) -> BenchmarkReport {
    let mut rows = Vec::with_capacity(tasks.len());
    for (index, task) in tasks.iter().enumerate() {
        let task_seed = seed.wrapping_add(index as u64);
        let (metric, outcome) = match &task.kind {
            TaskKind::Probe { labels, l2, iters } => (
                "roc_auc",
                probe_task(emb, labels, *l2, *iters, task_seed),
            ),
            TaskKind::FollowJaccard {
                follows,
                pairs,
                metric,
            } => (
                "spearman_rho",
                follow_jaccard_task(emb, follows, pairs, *metric).map(|o| o.rho),
            ),
        };
        let (value, error) = match outcome {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        rows.push(ReportRow {
            task: task.name.clone(),
            metric: metric.to_owned(),
            value,
            error,
            dataset_digest: task.dataset_digest.clone(),
            timestamp: clock.now(),
        });
    }
    BenchmarkReport {
        embedding: embedding_name.to_owned(),
        seed,
        rows,
    }
}

/// Held-out ROC-AUC of a logistic probe over the labeled entities; classes
/// beyond two are macro-averaged one-vs-rest.
fn probe_task(
    emb: &EmbeddingMatrix,
    labels: &[(String, String)],
    l2: f64,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let mut samples: Vec<(usize, &str)> = Vec::with_capacity(labels.len());
    for (key, label) in labels {
        if let Some(i) = emb.vocab().get(key) {
            samples.push((i, label.as_str()));
        }
    }
    if samples.len() < 4 {
        return Err(Error::EmptyInput(format!(
            "only {} labeled entities resolve against the embedding",
            samples.len()
        )));
    }
    let classes: BTreeSet<&str> = samples.iter().map(|(_, l)| *l).collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((samples.len() as f64) * TRAIN_FRACTION).floor() as usize;
    let (train_idx, test_idx) = order.split_at(n_train);

    // binary: score the lexicographically larger class; multiclass: macro OVR
    let targets: Vec<&str> = if classes.len() == 2 {
        vec![*classes.iter().nth(1).unwrap()]
    } else {
        classes.iter().copied().collect()
    };

    let mut aucs = Vec::new();
    for target in targets {
        let to_xy = |idx: &[usize]| {
            let features: Vec<&[f64]> = idx.iter().map(|&s| emb.row(samples[s].0)).collect();
            let labels: Vec<bool> = idx.iter().map(|&s| samples[s].1 == target).collect();
            (features, labels)
        };
        let (train_x, train_y) = to_xy(train_idx);
        let (test_x, test_y) = to_xy(test_idx);
        if !train_y.iter().any(|&l| l)
            || train_y.iter().all(|&l| l)
            || !test_y.iter().any(|&l| l)
            || test_y.iter().all(|&l| l)
        {
            continue; // class missing from a fold
        }
        let probe = train_probe(&train_x, &train_y, l2, iters)?;
        let scores: Vec<f64> = test_x.iter().map(|x| probe.score(x)).collect();
        aucs.push(roc_auc(&scores, &test_y)?);
    }
    if aucs.is_empty() {
        return Err(Error::EmptyInput(
            "no class present in both train and test folds".into(),
        ));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}
