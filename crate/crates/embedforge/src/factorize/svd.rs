//! Randomized truncated SVD over sparse interaction matrices (Gaussian range
//! finding with QR re-orthonormalized power iterations).

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SvdModel;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::matrix::{CsrView, SparseInteractionMatrix};

/// Relative cutoff below which trailing singular values are treated as zero.
const RANK_TOL: f64 = 1e-12;

/// Top-k singular triplets of a sparse matrix.
///
/// The sketch width is `k + oversample`, clamped to `min(n_rows, n_cols)`; at
/// the clamp the subspace captures the full range and the decomposition is
/// exact up to roundoff. Each right singular vector is sign-fixed so its
/// largest-magnitude entry is positive. Deterministic for a fixed seed.
pub fn truncated_svd(
    m: &SparseInteractionMatrix,
    k: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<SvdModel> {
    let min_dim = m.n_rows().min(m.n_cols());
    if k < 1 || k > min_dim {
        return Err(Error::InvalidParameter(format!(
            "rank {k} out of range [1, {min_dim}]"
        )));
    }
    if !m.entries().iter().any(|e| e.2 != 0.0) {
        return Err(Error::EmptyInput("matrix has no nonzero entries".into()));
    }

    let csr = m.to_csr();
    let sample = (k + oversample).min(min_dim).max(k);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(m.n_cols(), sample, |_, _| rng.sample(StandardNormal));

    let y = sparse_mul_dense(&csr, &omega);
    let mut q = y.qr().q();
    for _ in 0..power_iters {
        let z = sparse_t_mul_dense(&csr, &q).qr().q();
        q = sparse_mul_dense(&csr, &z).qr().q();
    }

    // B = Q^T A, computed as (A^T Q)^T
    let b = sparse_t_mul_dense(&csr, &q).transpose();
    let svd = b.svd(true, true);
    let u_small = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let u_full = q * u_small;

    // order components by singular value, descending, dropping the zero tail
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let sigma_max = svd.singular_values[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .take(k)
        .filter(|&t| svd.singular_values[t] > sigma_max * RANK_TOL)
        .collect();
    let rank = kept.len();

    let mut singular_values = Vec::with_capacity(rank);
    let mut u_values = vec![0.0; m.n_rows() * rank];
    let mut v_values = vec![0.0; m.n_cols() * rank];
    for (out, &t) in kept.iter().enumerate() {
        singular_values.push(svd.singular_values[t]);
        // sign convention: largest-magnitude entry of the right vector positive
        let mut best = 0;
        for j in 1..m.n_cols() {
            if v_t[(t, j)].abs() > v_t[(t, best)].abs() {
                best = j;
            }
        }
        let sign = if v_t[(t, best)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m.n_rows() {
            u_values[i * rank + out] = sign * u_full[(i, t)];
        }
        for j in 0..m.n_cols() {
            v_values[j * rank + out] = sign * v_t[(t, j)];
        }
    }

    Ok(SvdModel {
        left: EmbeddingMatrix::from_values(m.row_vocab().clone(), rank, u_values)?,
        singular_values,
        right: EmbeddingMatrix::from_values(m.col_vocab().clone(), rank, v_values)?,
        requested_rank: k,
    })
}

/// Y = A X for sparse A (n x m) and dense X (m x s).
fn sparse_mul_dense(a: &CsrView, x: &DMatrix<f64>) -> DMatrix<f64> {
    let s = x.ncols();
    let mut y = DMatrix::zeros(a.n_rows, s);
    for i in 0..a.n_rows {
        let (cols, vals) = a.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            for t in 0..s {
                y[(i, t)] += w * x[(j, t)];
            }
        }
    }
    y
}

/// Y = A^T X for sparse A (n x m) and dense X (n x s).
fn sparse_t_mul_dense(a: &CsrView, x: &DMatrix<f64>) -> DMatrix<f64> {
    let s = x.ncols();
    let mut y = DMatrix::zeros(a.n_cols, s);
    for i in 0..a.n_rows {
        let (cols, vals) = a.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            for t in 0..s {
                y[(j, t)] += w * x[(i, t)];
            }
        }
    }
    y
}
