//! Oracle-backed checks for the factorization paths: the randomized SVD
//! against a one-sided Jacobi decomposition, and the sparse ALS against a
//! dense reference implementation run from identical initialization.

mod common;

use embedforge::factorize::{implicit_als, implicit_objective, truncated_svd, AlsParams};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[test]
fn randomized_svd_matches_jacobi_on_random_sparse_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let m = common::random_sparse(20, 15, 0.3, &mut rng);
    let svd = truncated_svd(&m, 5, 10, 2, 42).unwrap();
    let oracle = common::jacobi_singular_values(&m.to_dense());
    for (t, (got, want)) in svd.singular_values.iter().zip(&oracle).enumerate() {
        assert!(
            (got - want).abs() <= 1e-6 * want,
            "sigma[{t}]: {got} vs oracle {want}"
        );
    }
}

#[test]
fn full_rank_reconstruction_within_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let m = common::random_sparse(12, 9, 0.5, &mut rng);
    let svd = truncated_svd(&m, 9, 20, 2, 7).unwrap();
    assert_eq!(svd.rank(), 9, "random dense-ish matrix should be full rank");
    let dense = m.to_dense();
    let recon = common::reconstruction(&svd.left, &svd.singular_values, &svd.right);
    let err = common::matrix_diff_frobenius(&dense, &recon);
    assert!(err <= 1e-6 * common::frobenius(&dense), "residual {err}");
}

#[test]
fn eckart_young_residual_matches_oracle_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let m = common::random_sparse(18, 14, 0.4, &mut rng);
    let dense = m.to_dense();
    let oracle = common::jacobi_singular_values(&dense);
    for k in [2usize, 5, 9] {
        let svd = truncated_svd(&m, k, 14, 2, 3).unwrap();
        let recon = common::reconstruction(&svd.left, &svd.singular_values, &svd.right);
        let got = common::matrix_diff_frobenius(&dense, &recon);
        let want = oracle[k..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!(
            (got - want).abs() <= 1e-6 * common::frobenius(&dense),
            "k={k}: residual {got} vs optimal {want}"
        );
    }
}

#[test]
fn sparse_als_matches_dense_reference_from_identical_init() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let m = common::random_sparse(30, 20, 0.25, &mut rng);
    let (k, alpha, lambda, iters, seed) = (4usize, 12.0, 0.3, 5usize, 99u64);
    let model = implicit_als(
        &m,
        AlsParams {
            rank: k,
            alpha,
            lambda,
            iters,
            seed,
        },
    )
    .unwrap();

    // replicate the seeded init: users then items, uniform [-0.01, 0.01]
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..k).map(|_| init_rng.random_range(-0.01..0.01)).collect())
            .collect()
    };
    let init_users = fill(m.n_rows());
    let init_items = fill(m.n_cols());
    let reference = common::reference_implicit_als(
        &m.to_dense(),
        k,
        alpha,
        lambda,
        iters,
        init_users,
        init_items,
    );

    let got = implicit_objective(&m, &model.left_star, &model.right_star, alpha, lambda);
    assert!(
        (got - reference.objective).abs() <= 1e-6 * reference.objective,
        "objective {got} vs dense reference {}",
        reference.objective
    );
    // factors agree row by row, not just in objective value
    for i in 0..m.n_rows() {
        for t in 0..k {
            let diff = (model.left_star.row(i)[t] - reference.users[i][t]).abs();
            assert!(diff <= 1e-8, "user {i} component {t} differs by {diff}");
        }
    }
}
