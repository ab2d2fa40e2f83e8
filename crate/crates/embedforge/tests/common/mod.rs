//! Shared test oracles, independent of the library's implementation paths:
//! a one-sided Jacobi SVD, a dense reference ALS with Gaussian-elimination
//! solves, and brute-force metric evaluators.

#![allow(dead_code)]

use embedforge::matrix::SparseInteractionMatrix;
use embedforge::{consolidate, EmbeddingMatrix};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Singular values of a dense matrix by one-sided Jacobi rotations,
/// descending. Independent of the library's randomized SVD path.
pub fn jacobi_singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    if m == 0 || n == 0 {
        return vec![];
    }
    // materialize in tall orientation and rotate its columns
    let (rows, cols) = if m >= n { (m, n) } else { (n, m) };
    let mut work = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            work[i][j] = if m >= n { a[i][j] } else { a[j][i] };
        }
    }
    let tol = 1e-14;
    for _sweep in 0..100 {
        let mut converged = true;
        for p in 0..cols.saturating_sub(1) {
            for q in p + 1..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for row in &work {
                    let (ap, aq) = (row[p], row[q]);
                    alpha += ap * ap;
                    beta += aq * aq;
                    gamma += ap * aq;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let ap = work[i][p];
                    let aq = work[i][q];
                    work[i][p] = c * ap - s * aq;
                    work[i][q] = s * ap + c * aq;
                }
            }
        }
        if converged {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| work[i][j] * work[i][j]).sum::<f64>().sqrt())
        .collect();
    sigma.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sigma
}

pub fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|row| row.iter().map(|v| v * v))
        .sum::<f64>()
        .sqrt()
}

/// Solves A x = b by Gaussian elimination with partial pivoting; independent
/// of the library's Cholesky-based solves.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / diag;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Dense reference implicit ALS: full confidence/preference matrices, dense
/// normal equations per row, Gaussian-elimination solves. Items update
/// first, then users, mirroring the library's half-iteration order.
pub struct DenseAlsResult {
    pub users: Vec<Vec<f64>>,
    pub items: Vec<Vec<f64>>,
    pub objective: f64,
}

pub fn reference_implicit_als(
    x: &[Vec<f64>],
    k: usize,
    alpha: f64,
    lambda: f64,
    iters: usize,
    init_users: Vec<Vec<f64>>,
    init_items: Vec<Vec<f64>>,
) -> DenseAlsResult {
    let n = x.len();
    let m = x[0].len();
    let mut users = init_users;
    let mut items = init_items;
    let conf = |v: f64| 1.0 + alpha * v;
    let pref = |v: f64| if v > 0.0 { 1.0 } else { 0.0 };

    for _ in 0..iters {
        // items against users
        for j in 0..m {
            let mut a = vec![vec![0.0; k]; k];
            let mut b = vec![0.0; k];
            for (i, user) in users.iter().enumerate() {
                let c = conf(x[i][j]);
                let p = pref(x[i][j]);
                for t in 0..k {
                    b[t] += c * p * user[t];
                    for s in 0..k {
                        a[t][s] += c * user[t] * user[s];
                    }
                }
            }
            for t in 0..k {
                a[t][t] += lambda;
            }
            items[j] = gauss_solve(a, b);
        }
        // users against items
        for i in 0..n {
            let mut a = vec![vec![0.0; k]; k];
            let mut b = vec![0.0; k];
            for (j, item) in items.iter().enumerate() {
                let c = conf(x[i][j]);
                let p = pref(x[i][j]);
                for t in 0..k {
                    b[t] += c * p * item[t];
                    for s in 0..k {
                        a[t][s] += c * item[t] * item[s];
                    }
                }
            }
            for t in 0..k {
                a[t][t] += lambda;
            }
            users[i] = gauss_solve(a, b);
        }
    }

    let mut objective = 0.0;
    for i in 0..n {
        for j in 0..m {
            let d: f64 = (0..k).map(|t| users[i][t] * items[j][t]).sum();
            objective += conf(x[i][j]) * (pref(x[i][j]) - d) * (pref(x[i][j]) - d);
        }
    }
    objective += lambda
        * (users.iter().flat_map(|u| u.iter().map(|v| v * v)).sum::<f64>()
            + items.iter().flat_map(|v| v.iter().map(|w| w * w)).sum::<f64>());
    DenseAlsResult {
        users,
        items,
        objective,
    }
}

/// Random sparse interaction matrix with every row and column populated.
pub fn random_sparse(
    n_rows: usize,
    n_cols: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> SparseInteractionMatrix {
    let mut recs: Vec<(String, String, f64)> = Vec::new();
    for i in 0..n_rows {
        for j in 0..n_cols {
            if rng.random::<f64>() < density {
                recs.push((format!("r{i}"), format!("c{j}"), rng.random_range(0.05..2.0)));
            }
        }
    }
    for i in 0..n_rows {
        recs.push((
            format!("r{i}"),
            format!("c{}", rng.random_range(0..n_cols)),
            rng.random_range(0.05..2.0),
        ));
    }
    for j in 0..n_cols {
        recs.push((
            format!("r{}", rng.random_range(0..n_rows)),
            format!("c{j}"),
            rng.random_range(0.05..2.0),
        ));
    }
    consolidate(&recs).unwrap()
}

pub fn reconstruction(model_left: &EmbeddingMatrix, sigma: &[f64], model_right: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    let n = model_left.len();
    let m = model_right.len();
    let k = sigma.len();
    let mut out = vec![vec![0.0; m]; n];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..k)
                .map(|t| model_left.row(i)[t] * sigma[t] * model_right.row(j)[t])
                .sum();
        }
    }
    out
}

pub fn matrix_diff_frobenius(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)))
        .sum::<f64>()
        .sqrt()
}

// Brute-force metric oracles.

pub fn auc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut total = 0.0;
    for i in 0..scores.len() {
        if !labels[i] {
            continue;
        }
        for j in 0..scores.len() {
            if labels[j] {
                continue;
            }
            total += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / total
}

pub fn spearman_by_ranks(xs: &[f64], ys: &[f64]) -> f64 {
    let rank_of = |v: &[f64], i: usize| {
        let smaller = v.iter().filter(|&&x| x < v[i]).count();
        let equal = v.iter().filter(|&&x| x == v[i]).count();
        smaller as f64 + (equal as f64 + 1.0) / 2.0
    };
    let n = xs.len();
    let rx: Vec<f64> = (0..n).map(|i| rank_of(xs, i)).collect();
    let ry: Vec<f64> = (0..n).map(|i| rank_of(ys, i)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}

pub fn ndcg_direct(ranking: &[usize], relevant: &std::collections::HashSet<usize>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for (pos, item) in ranking.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let mut ideal = 0.0;
    for pos in 0..k.min(relevant.len()) {
        ideal += 1.0 / ((pos + 2) as f64).log2();
    }
    dcg / ideal
}
