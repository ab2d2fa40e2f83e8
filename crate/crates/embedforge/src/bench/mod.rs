//! The embedding benchmarking system: similarity metrics, probe-classifier
//! tasks, rank-correlation and ranking metrics, and drift overlap analysis.

mod probe;
mod suite;

pub use probe::{logistic_loss_grad, train_probe, LogisticProbe};
pub use suite::{run_suite, BenchTask, BenchmarkReport, ReportRow, TaskKind};

use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMetric {
    Dot,
    Cosine,
    Euclidean,
}

impl SimilarityMetric {
    pub fn name(&self) -> &'static str {
        match self {
            SimilarityMetric::Dot => "dot",
            SimilarityMetric::Cosine => "cosine",
            SimilarityMetric::Euclidean => "euclidean",
        }
    }
}

impl FromStr for SimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(SimilarityMetric::Dot),
            "cosine" => Ok(SimilarityMetric::Cosine),
            "euclidean" => Ok(SimilarityMetric::Euclidean),
            other => Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }
}

/// Dot similarity u.v, cosine similarity u.v/(|u||v|), or euclidean
/// similarity 1 - |u - v| (which can be negative; only its rank order
/// matters for correlation tasks).
pub fn similarity(u: &[f64], v: &[f64], metric: SimilarityMetric) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    match metric {
        SimilarityMetric::Dot => Ok(dot),
        SimilarityMetric::Cosine => {
            let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nu == 0.0 || nv == 0.0 {
                return Err(Error::InvalidParameter(
                    "cosine similarity undefined for zero vectors".into(),
                ));
            }
            Ok(dot / (nu * nv))
        }
        SimilarityMetric::Euclidean => {
            let dist = u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok(1.0 - dist)
        }
    }
}

/// Midranks of the values: ties receive the average of the ranks they span.
/// Ranks are 1-based.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // 1-based midrank
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counted half (the Mann-Whitney formulation).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = midranks(scores);
    let pos_rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Spearman rank correlation: Pearson correlation of midrank-transformed
/// values. Errors when either argument has zero rank variance.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput("need at least 2 pairs".into()));
    }
    let rx = midranks(xs);
    let ry = midranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::ZeroRankVariance);
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Jaccard index |a n b| / |a u b|; errors when both sets are empty.
pub fn jaccard<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> Result<f64> {
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    if union == 0 {
        return Err(Error::EmptyInput("both sets are empty".into()));
    }
    Ok(intersection as f64 / union as f64)
}

/// NDCG with binary gains and 1/log2(pos+1) discounts over the top k,
/// normalized by the ideal DCG at k.
pub fn ndcg<K: Eq + Hash>(ranking: &[K], relevant: &HashSet<K>, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if relevant.is_empty() {
        return Err(Error::EmptyInput("relevant set is empty".into()));
    }
    let discount = |pos: usize| 1.0 / ((pos + 1) as f64).log2(); // pos is 1-based
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let ideal: f64 = (1..=k.min(relevant.len())).map(discount).sum();
    Ok(dcg / ideal)
}

/// Percent overlap of the top-k keys of two count maps, top-k taken by
/// (count desc, key asc).
pub fn topk_overlap(
    counts_a: &HashMap<String, f64>,
    counts_b: &HashMap<String, f64>,
    k: usize,
) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let top = |counts: &HashMap<String, f64>| -> Result<HashSet<String>> {
        if counts.len() < k {
            return Err(Error::InvalidParameter(format!(
                "need at least {k} keys, got {}",
                counts.len()
            )));
        }
        let mut items: Vec<(&String, &f64)> = counts.iter().collect();
        items.sort_by(|(ka, va), (kb, vb)| {
            vb.partial_cmp(va)
                .expect("finite counts")
                .then_with(|| ka.cmp(kb))
        });
        Ok(items.into_iter().take(k).map(|(key, _)| key.clone()).collect())
    };
    let ta = top(counts_a)?;
    let tb = top(counts_b)?;
    Ok(100.0 * ta.intersection(&tb).count() as f64 / k as f64)
}

/// Outcome of the follow-Jaccard task: the Spearman correlation between
/// embedding similarity and follow-set Jaccard over resolvable pairs.
#[derive(Debug, Clone)]
pub struct FollowJaccardOutcome {
    pub rho: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Spearman correlation between embedding similarity and follow-set Jaccard
/// over a list of user pairs. Pairs that cannot be resolved (missing
/// embedding or follow set, undefined similarity or Jaccard) are skipped and
/// counted; all pairs skipped is an error.
pub fn follow_jaccard_task(
    emb: &crate::embedding::EmbeddingMatrix,
    follow_sets: &HashMap<String, HashSet<String>>,
    pairs: &[(String, String)],
    metric: SimilarityMetric,
) -> Result<FollowJaccardOutcome> {
    let mut sims = Vec::with_capacity(pairs.len());
    let mut jacs = Vec::with_capacity(pairs.len());
    let mut skipped = 0usize;
    for (u1, u2) in pairs {
        let resolved = (|| {
            let e1 = emb.lookup(u1)?;
            let e2 = emb.lookup(u2)?;
            let f1 = follow_sets.get(u1)?;
            let f2 = follow_sets.get(u2)?;
            let sim = similarity(e1, e2, metric).ok()?;
            let jac = jaccard(f1, f2).ok()?;
            Some((sim, jac))
        })();
        match resolved {
            Some((sim, jac)) => {
                sims.push(sim);
                jacs.push(jac);
            }
            None => skipped += 1,
        }
    }
    if sims.is_empty() {
        return Err(Error::EmptyInput("no resolvable pairs".into()));
    }
    let rho = spearman_rho(&sims, &jacs)?;
    Ok(FollowJaccardOutcome {
        rho,
        pairs_used: sims.len(),
        pairs_skipped: skipped,
    })
}
