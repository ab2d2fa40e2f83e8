//! Assigning embeddings to new entities against a frozen factorization:
//! exact SVD projection, confidence-weighted least squares, batched streaming
//! fold-in, and lookalike quantile features.

mod experiment;

pub use experiment::{run_foldin_experiment, ExperimentRow, FoldInExperimentParams};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::factorize::{CoEmbeddingModel, ModelKind};
use crate::vocab::EntityVocab;

/// A sparse interaction vector indexed against a model's item vocabulary.
pub type SparseVec = [(usize, f64)];

/// Precomputed dense fold-in matrix F (items x dim) such that a new entity
/// with interaction vector x gets embedding u = x . F.
///
/// For SVD-absorbed models F = V diag(sigma)^{-1/2} (equivalently
/// V* diag(sigma)^{-1}), the exact projection onto the embedding row space.
/// For ALS models F = V* (V*^T V* + lambda I)^{-1}, the unweighted ridge
/// approximation of V^{-1}; the exact confidence-weighted solve is
/// [`ls_fold_in`].
#[derive(Debug, Clone)]
pub struct FoldInMatrix {
    kind: &'static str,
    values: Vec<f64>,
    dim: usize,
    item_vocab: EntityVocab,
}

impl FoldInMatrix {
    pub fn from_model(model: &CoEmbeddingModel) -> Result<Self> {
        let items = &model.right_star;
        let (n, k) = (items.len(), items.dim());
        let mut values = vec![0.0; n * k];
        match &model.kind {
            ModelKind::SvdAbsorbed { singular_values } => {
                for j in 0..n {
                    let row = items.row(j);
                    for t in 0..k {
                        values[j * k + t] = row[t] / singular_values[t];
                    }
                }
            }
            ModelKind::Als { lambda, .. } => {
                let mut normal = crate::factorize::als_gram(items);
                for t in 0..k {
                    normal[(t, t)] += lambda;
                }
                let inv = normal.try_inverse().ok_or_else(|| {
                    Error::SingularSystem("item normal matrix not invertible".into())
                })?;
                for j in 0..n {
                    let row = items.row(j);
                    for t in 0..k {
                        values[j * k + t] = (0..k).map(|s| row[s] * inv[(s, t)]).sum();
                    }
                }
            }
        }
        Ok(Self {
            kind: model.kind.name(),
            values,
            dim: k,
            item_vocab: items.vocab().clone(),
        })
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn item_vocab(&self) -> &EntityVocab {
        &self.item_vocab
    }

    pub fn row(&self, item: usize) -> &[f64] {
        &self.values[item * self.dim..(item + 1) * self.dim]
    }

    /// u = x . F for a sparse x.
    pub fn fold(&self, x: &SparseVec) -> Result<Vec<f64>> {
        let mut u = vec![0.0; self.dim];
        for &(j, w) in x {
            if j >= self.item_vocab.len() {
                return Err(Error::IndexOutOfBounds {
                    index: j,
                    size: self.item_vocab.len(),
                });
            }
            let row = self.row(j);
            for t in 0..self.dim {
                u[t] += w * row[t];
            }
        }
        Ok(u)
    }
}

/// Projects a new interaction vector onto the embedding row space of an
/// SVD-absorbed model: u = x V diag(sigma)^{-1/2}, the minimizer of the
/// reconstruction residual against the frozen item factors.
pub fn svd_fold_in(x: &SparseVec, model: &CoEmbeddingModel) -> Result<Vec<f64>> {
    let ModelKind::SvdAbsorbed { singular_values } = &model.kind else {
        return Err(Error::InvalidParameter(
            "svd_fold_in requires an svd-absorbed model".into(),
        ));
    };
    let items = &model.right_star;
    let k = items.dim();
    let mut u = vec![0.0; k];
    for &(j, w) in x {
        if j >= items.len() {
            return Err(Error::IndexOutOfBounds {
                index: j,
                size: items.len(),
            });
        }
        let row = items.row(j);
        for t in 0..k {
            u[t] += w * row[t];
        }
    }
    for t in 0..k {
        u[t] /= singular_values[t];
    }
    Ok(u)
}

/// Least-squares fold-in. For ALS models this solves the same
/// confidence-weighted ridge problem as one training user half-step against
/// the frozen item factors (alpha and lambda default to the training values).
/// For SVD-absorbed models it solves the ridge projection, which at lambda=0
/// coincides with [`svd_fold_in`].
pub fn ls_fold_in(
    x: &SparseVec,
    model: &CoEmbeddingModel,
    lambda: Option<f64>,
    alpha: Option<f64>,
) -> Result<Vec<f64>> {
    let items = &model.right_star;
    for &(j, _) in x {
        if j >= items.len() {
            return Err(Error::IndexOutOfBounds {
                index: j,
                size: items.len(),
            });
        }
    }
    match &model.kind {
        ModelKind::Als {
            alpha: a0,
            lambda: l0,
            ..
        } => {
            let alpha = alpha.unwrap_or(*a0);
            let lambda = lambda.unwrap_or(*l0);
            if lambda <= 0.0 {
                return Err(Error::InvalidParameter(
                    "ls_fold_in on an ALS model requires lambda > 0".into(),
                ));
            }
            let gram = crate::factorize::als_gram(items);
            let (cols, vals): (Vec<usize>, Vec<f64>) = x.iter().copied().unzip();
            crate::factorize::als_ridge_solve(&cols, &vals, items, &gram, alpha, lambda)
        }
        ModelKind::SvdAbsorbed { singular_values } => {
            let lambda = lambda.unwrap_or(0.0);
            if lambda < 0.0 {
                return Err(Error::InvalidParameter("lambda must be >= 0".into()));
            }
            let k = items.dim();
            let mut u = vec![0.0; k];
            for &(j, w) in x {
                let row = items.row(j);
                for t in 0..k {
                    u[t] += w * row[t];
                }
            }
            // V*^T V* = diag(sigma), so the ridge solution is diagonal
            for t in 0..k {
                u[t] /= singular_values[t] + lambda;
            }
            Ok(u)
        }
    }
}

/// Batch fold-in result: one embedding row per user in first-seen order.
#[derive(Debug)]
pub struct BatchFoldOutcome {
    pub embeddings: EmbeddingMatrix,
    /// Interactions whose item key was missing from the fold matrix.
    pub unknown_items: usize,
}

/// Streams (user key, item key, weight) records through a fold-in matrix,
/// accumulating u = sum weight * F[item] per user. Unknown items are skipped
/// and counted; output rows appear in first-seen user order.
pub fn batch_fold_in(
    interactions: &[(String, String, f64)],
    fold: &FoldInMatrix,
) -> BatchFoldOutcome {
    let mut user_vocab = EntityVocab::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut unknown_items = 0usize;
    for (user, item, weight) in interactions {
        let Some(j) = fold.item_vocab.get(item) else {
            unknown_items += 1;
            continue;
        };
        let u = user_vocab.intern(user);
        if u == rows.len() {
            rows.push(vec![0.0; fold.dim]);
        }
        let f = fold.row(j);
        let acc = &mut rows[u];
        for t in 0..fold.dim {
            acc[t] += weight * f[t];
        }
    }
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let embeddings = EmbeddingMatrix::from_values(user_vocab, fold.dim, values)
        .expect("accumulated rows are finite");
    BatchFoldOutcome {
        embeddings,
        unknown_items,
    }
}

/// Named groups of related-entity embeddings (address book, interests,
/// geography), each holding one vector per group member.
#[derive(Debug, Clone, Default)]
pub struct LookalikeGroups {
    groups: Vec<(String, Vec<Vec<f64>>)>,
    dim: Option<usize>,
}

impl LookalikeGroups {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a named group; all member vectors must share one dimension.
    pub fn add_group(&mut self, name: &str, members: Vec<Vec<f64>>) -> Result<()> {
        for m in &members {
            match self.dim {
                None => self.dim = Some(m.len()),
                Some(d) if d != m.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: m.len(),
                    })
                }
                _ => {}
            }
        }
        self.groups.push((name.to_owned(), members));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Value emitted for the quantiles of an empty group.
pub const EMPTY_GROUP_SENTINEL: f64 = 0.0;

/// Quantile features of candidate-to-group similarities: per group, the dot
/// product of the candidate with every member, reduced to the requested
/// quantiles (linear interpolation between order statistics). The output is
/// the concatenation over groups of the quantile values followed by a
/// presence flag; empty groups emit the sentinel per quantile with flag 0.
pub fn lookalike_features(
    candidate: &[f64],
    groups: &LookalikeGroups,
    quantiles: &[f64],
) -> Result<Vec<f64>> {
    if groups.groups.iter().all(|(_, members)| members.is_empty()) {
        return Err(Error::EmptyInput("all lookalike groups are empty".into()));
    }
    for &q in quantiles {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("quantile {q} not in [0, 1]")));
        }
    }
    let mut features = Vec::with_capacity(groups.len() * (quantiles.len() + 1));
    for (_, members) in &groups.groups {
        if members.is_empty() {
            features.extend(quantiles.iter().map(|_| EMPTY_GROUP_SENTINEL));
            features.push(0.0);
            continue;
        }
        let mut sims: Vec<f64> = members
            .iter()
            .map(|m| {
                if m.len() != candidate.len() {
                    return Err(Error::DimensionMismatch {
                        expected: candidate.len(),
                        got: m.len(),
                    });
                }
                Ok(candidate.iter().zip(m).map(|(a, b)| a * b).sum())
            })
            .collect::<Result<_>>()?;
        sims.sort_by(|a, b| a.partial_cmp(b).expect("finite similarities"));
        for &q in quantiles {
            features.push(interpolated_quantile(&sims, q));
        }
        features.push(1.0);
    }
    Ok(features)
}

/// Linear interpolation between order statistics of a sorted slice.
fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Converts a dense slice into the sparse entries of its nonzero positions.
pub fn dense_to_sparse(xs: &[f64]) -> Vec<(usize, f64)> {
    xs.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| (i, v))
        .collect()
}
