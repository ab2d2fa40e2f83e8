//! Train-versus-fold experiment: train ALS on the most active users only,
//! fold the rest in, and compare held-out NDCG across activity cutoffs.

use std::collections::HashSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::bench::ndcg;
use crate::error::{Error, Result};
use crate::factorize::{implicit_als, AlsParams};
use crate::matrix::SparseInteractionMatrix;
use crate::vocab::EntityVocab;

#[derive(Debug, Clone)]
pub struct FoldInExperimentParams {
    /// Percentages of users (by activity) to train on, each in (0, 100].
    pub percents: Vec<f64>,
    pub rank: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub iters: usize,
    /// Fraction of each user's engagements assigned to their train split.
    pub split_ratio: f64,
    pub seed: u64,
}

impl Default for FoldInExperimentParams {
    fn default() -> Self {
        Self {
            percents: vec![20.0, 40.0, 60.0, 80.0, 100.0],
            rank: 4,
            alpha: 40.0,
            lambda: 0.1,
            iters: 10,
            split_ratio: 0.5,
            seed: 0,
        }
    }
}

/// One experiment row: mean held-out NDCG over the trained and folded user
/// cohorts at a given training percentage.
#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub percent: f64,
    pub ndcg_trained: Option<f64>,
    pub ndcg_folded: Option<f64>,
    pub n_trained: usize,
    pub n_folded: usize,
    /// Users excluded from evaluation (empty train or test split).
    pub n_excluded: usize,
}

impl ExperimentRow {
    /// Mean NDCG over all evaluated users, trained and folded together.
    pub fn ndcg_overall(&self) -> Option<f64> {
        let total = self.n_trained + self.n_folded;
        if total == 0 {
            return None;
        }
        let sum = self.ndcg_trained.unwrap_or(0.0) * self.n_trained as f64
            + self.ndcg_folded.unwrap_or(0.0) * self.n_folded as f64;
        Some(sum / total as f64)
    }
}

struct UserSplit {
    train: Vec<(usize, f64)>,
    test: Vec<(usize, f64)>,
}

/// Per-user train/test split, activity ranking over training weight, then
/// for each percentage: ALS on the top users' training engagements, ridge
/// fold-in of the remainder, and NDCG over test engagements (ranking all
/// items outside the user's training set, at k = the user's test count).
pub fn run_foldin_experiment(
    m: &SparseInteractionMatrix,
    params: &FoldInExperimentParams,
) -> Result<Vec<ExperimentRow>> {
    for &p in &params.percents {
        if !(p > 0.0 && p <= 100.0) {
            return Err(Error::InvalidParameter(format!(
                "percent {p} not in (0, 100]"
            )));
        }
    }
    if !(params.split_ratio > 0.0 && params.split_ratio < 1.0) {
        return Err(Error::InvalidParameter("split ratio must be in (0, 1)".into()));
    }
    if m.n_rows() == 0 || m.n_cols() == 0 {
        return Err(Error::EmptyInput("experiment needs a non-empty matrix".into()));
    }

    let csr = m.to_csr();
    let splits: Vec<UserSplit> = (0..m.n_rows())
        .map(|i| {
            let (cols, vals) = csr.row(i);
            let mut engagements: Vec<(usize, f64)> =
                cols.iter().copied().zip(vals.iter().copied()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(
                params.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            engagements.shuffle(&mut rng);
            let n_train = ((engagements.len() as f64) * params.split_ratio).round() as usize;
            let test = engagements.split_off(n_train);
            UserSplit {
                train: engagements,
                test,
            }
        })
        .collect();

    // activity ranking: total training weight, ties by lower vocab index
    let mut ranking: Vec<usize> = (0..m.n_rows()).collect();
    let activity: Vec<f64> = splits
        .iter()
        .map(|s| s.train.iter().map(|e| e.1).sum())
        .collect();
    ranking.sort_by(|&a, &b| {
        activity[b]
            .partial_cmp(&activity[a])
            .expect("finite activity")
            .then(a.cmp(&b))
    });

    let mut rows = Vec::with_capacity(params.percents.len());
    for (run_idx, &percent) in params.percents.iter().enumerate() {
        let n_top = (((percent / 100.0) * m.n_rows() as f64).round() as usize)
            .clamp(1, m.n_rows());
        let top: HashSet<usize> = ranking[..n_top].iter().copied().collect();

        // training matrix: top users' training engagements, full item vocab
        let mut train_vocab = EntityVocab::with_capacity(n_top);
        let mut entries = Vec::new();
        for &user in &ranking[..n_top] {
            if splits[user].train.is_empty() {
                continue;
            }
            let r = train_vocab.intern(m.row_vocab().key(user).unwrap());
            for &(j, w) in &splits[user].train {
                entries.push((r, j, w));
            }
        }
        if train_vocab.is_empty() {
            return Err(Error::EmptyInput(format!(
                "no training engagements at {percent}%"
            )));
        }
        let train_matrix = SparseInteractionMatrix::from_indexed(
            train_vocab,
            m.col_vocab().clone(),
            entries,
        )?;
        let model = implicit_als(
            &train_matrix,
            AlsParams {
                rank: params.rank,
                alpha: params.alpha,
                lambda: params.lambda,
                iters: params.iters,
                seed: params.seed.wrapping_add(run_idx as u64),
            },
        )?;

        let mut trained_scores = Vec::new();
        let mut folded_scores = Vec::new();
        let mut excluded = 0usize;
        for user in 0..m.n_rows() {
            let split = &splits[user];
            if split.train.is_empty() || split.test.is_empty() {
                excluded += 1;
                continue;
            }
            let is_trained = top.contains(&user);
            let u = if is_trained {
                let key = m.row_vocab().key(user).unwrap();
                model
                    .left_star
                    .lookup(key)
                    .expect("trained user present in model")
                    .to_vec()
            } else {
                super::ls_fold_in(&split.train, &model, None, None)?
            };

            let train_items: HashSet<usize> = split.train.iter().map(|e| e.0).collect();
            let mut candidates: Vec<(usize, f64)> = (0..m.n_cols())
                .filter(|j| !train_items.contains(j))
                .map(|j| {
                    let score: f64 = u
                        .iter()
                        .zip(model.right_star.row(j))
                        .map(|(a, b)| a * b)
                        .sum();
                    (j, score)
                })
                .collect();
            candidates.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("finite scores")
                    .then(a.0.cmp(&b.0))
            });
            let ordered: Vec<usize> = candidates.into_iter().map(|(j, _)| j).collect();
            let relevant: HashSet<usize> = split.test.iter().map(|e| e.0).collect();
            let score = ndcg(&ordered, &relevant, relevant.len())?;
            if is_trained {
                trained_scores.push(score);
            } else {
                folded_scores.push(score);
            }
        }

        let mean = |v: &[f64]| {
            if v.is_empty() {
                None
            } else {
                Some(v.iter().sum::<f64>() / v.len() as f64)
            }
        };
        rows.push(ExperimentRow {
            percent,
            ndcg_trained: mean(&trained_scores),
            ndcg_folded: mean(&folded_scores),
            n_trained: trained_scores.len(),
            n_folded: folded_scores.len(),
            n_excluded: excluded,
        });
    }
    Ok(rows)
}
