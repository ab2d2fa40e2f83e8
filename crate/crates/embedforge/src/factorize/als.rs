//! Implicit-feedback alternating least squares: confidence c = 1 + alpha*x,
//! preference p = 1{x > 0}, exact ridge solves per row.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CoEmbeddingModel, ModelKind};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::matrix::SparseInteractionMatrix;

#[derive(Debug, Clone, Copy)]
pub struct AlsParams {
    pub rank: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for AlsParams {
    fn default() -> Self {
        Self {
            rank: 32,
            alpha: 40.0,
            lambda: 0.1,
            iters: 15,
            seed: 0,
        }
    }
}

/// Factorizes an implicit-feedback matrix, minimizing
/// sum_ij c_ij (p_ij - u_i.v_j)^2 + lambda (|U|^2 + |V|^2).
///
/// Each iteration updates the item factors against the current user factors
/// and then the user factors against the fresh item factors, so the returned
/// user rows are exact ridge solutions against the returned item factors.
/// The objective is recorded at init and after every half-iteration.
pub fn implicit_als(m: &SparseInteractionMatrix, params: AlsParams) -> Result<CoEmbeddingModel> {
    let AlsParams {
        rank,
        alpha,
        lambda,
        iters,
        seed,
    } = params;
    if rank < 1 {
        return Err(Error::InvalidParameter("rank must be >= 1".into()));
    }
    if alpha <= 0.0 || lambda <= 0.0 {
        return Err(Error::InvalidParameter(
            "alpha and lambda must be positive".into(),
        ));
    }
    if iters < 1 {
        return Err(Error::InvalidParameter("iters must be >= 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |n: usize| -> Vec<f64> {
        (0..n * rank).map(|_| rng.random_range(-0.01..0.01)).collect()
    };
    let mut users =
        EmbeddingMatrix::from_values(m.row_vocab().clone(), rank, fill(m.n_rows()))?;
    let mut items =
        EmbeddingMatrix::from_values(m.col_vocab().clone(), rank, fill(m.n_cols()))?;

    let by_user = m.to_csr();
    let by_item = m.transpose().to_csr();

    let mut trace = vec![implicit_objective(m, &users, &items, alpha, lambda)];
    for _ in 0..iters {
        solve_side(&mut items, &users, &by_item, alpha, lambda)?;
        trace.push(implicit_objective(m, &users, &items, alpha, lambda));
        solve_side(&mut users, &items, &by_user, alpha, lambda)?;
        trace.push(implicit_objective(m, &users, &items, alpha, lambda));
    }

    Ok(CoEmbeddingModel {
        left_star: users,
        right_star: items,
        kind: ModelKind::Als {
            alpha,
            lambda,
            objective_trace: trace,
        },
    })
}

/// Re-solves every row of `target` against the frozen `other` factors. Rows
/// are independent, so parallel solves are race-free and worker-count
/// invariant.
fn solve_side(
    target: &mut EmbeddingMatrix,
    other: &EmbeddingMatrix,
    interactions: &crate::matrix::CsrView,
    alpha: f64,
    lambda: f64,
) -> Result<()> {
    let gram = gram(other);
    let rows: Result<Vec<Vec<f64>>> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let (cols, vals) = interactions.row(i);
            confidence_ridge_solve(cols, vals, other, &gram, alpha, lambda)
        })
        .collect();
    for (i, row) in rows?.into_iter().enumerate() {
        target.row_mut(i).copy_from_slice(&row);
    }
    Ok(())
}

/// Gram matrix F^T F of an embedding table.
pub(crate) fn gram(emb: &EmbeddingMatrix) -> DMatrix<f64> {
    let k = emb.dim();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..emb.len() {
        let row = emb.row(i);
        for a in 0..k {
            for b in 0..k {
                g[(a, b)] += row[a] * row[b];
            }
        }
    }
    g
}

/// One confidence-weighted ridge solve: the optimal factor row for an entity
/// whose nonzero interactions are (`items[t]`, `values[t]`), against frozen
/// `factors` with precomputed gram matrix. Solves
/// (F^T F + lambda I + sum_t alpha*x_t f_t f_t^T) u = sum_t (1 + alpha*x_t) f_t.
pub(crate) fn confidence_ridge_solve(
    items: &[usize],
    values: &[f64],
    factors: &EmbeddingMatrix,
    gram: &DMatrix<f64>,
    alpha: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let k = factors.dim();
    let mut a = gram.clone();
    for t in 0..k {
        a[(t, t)] += lambda;
    }
    let mut b = DVector::zeros(k);
    for (&j, &x) in items.iter().zip(values) {
        if x == 0.0 {
            continue;
        }
        let f = factors.row(j);
        let conf = alpha * x;
        for t in 0..k {
            b[t] += (1.0 + conf) * f[t];
            for s in 0..k {
                a[(t, s)] += conf * f[t] * f[s];
            }
        }
    }
    let chol = Cholesky::new(a)
        .ok_or_else(|| Error::SingularSystem("normal equations not positive definite".into()))?;
    Ok(chol.solve(&b).iter().copied().collect())
}

/// Explicit value of the implicit-feedback objective
/// sum_ij c_ij (p_ij - u_i.v_j)^2 + lambda (|U|^2 + |V|^2), with the all-pairs
/// term folded through the gram matrices so no dense n x m pass is needed.
pub fn implicit_objective(
    m: &SparseInteractionMatrix,
    users: &EmbeddingMatrix,
    items: &EmbeddingMatrix,
    alpha: f64,
    lambda: f64,
) -> f64 {
    let k = users.dim();
    let gu = gram(users);
    let gv = gram(items);
    // sum over all (i,j) of (u_i.v_j)^2 = <U^T U, V^T V>
    let mut obj = 0.0;
    for a in 0..k {
        for b in 0..k {
            obj += gu[(a, b)] * gv[(a, b)];
        }
    }
    for &(i, j, x) in m.entries() {
        if x == 0.0 {
            continue;
        }
        let d: f64 = users.row(i).iter().zip(items.row(j)).map(|(u, v)| u * v).sum();
        obj += (1.0 + alpha * x) * (1.0 - d) * (1.0 - d) - d * d;
    }
    let sq = |e: &EmbeddingMatrix| e.values().iter().map(|v| v * v).sum::<f64>();
    obj + lambda * (sq(users) + sq(items))
}
