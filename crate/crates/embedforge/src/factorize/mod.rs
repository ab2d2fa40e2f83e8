//! Truncated SVD and implicit-feedback ALS factorizations producing paired
//! left/right co-embeddings.

mod als;
mod svd;

pub use als::{implicit_als, implicit_objective, AlsParams};
pub use svd::truncated_svd;

pub(crate) use als::{confidence_ridge_solve as als_ridge_solve, gram as als_gram};

use crate::embedding::EmbeddingMatrix;
use crate::error::Result;

/// Truncated singular value decomposition X ~ U diag(sigma) V^T.
///
/// Columns of `left` (U) and `right` (V) are orthonormal; singular values are
/// positive and non-increasing. When the matrix rank is below the requested
/// rank, the zero tail is truncated and the model is flagged.
#[derive(Debug, Clone)]
pub struct SvdModel {
    pub left: EmbeddingMatrix,
    pub singular_values: Vec<f64>,
    pub right: EmbeddingMatrix,
    pub requested_rank: usize,
}

impl SvdModel {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// True when fewer than the requested number of components survived.
    pub fn is_rank_deficient(&self) -> bool {
        self.rank() < self.requested_rank
    }
}

/// How a co-embedding model was produced, with whatever extra state fold-in
/// needs for that kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// SVD factors with the square roots of the singular values absorbed.
    SvdAbsorbed { singular_values: Vec<f64> },
    /// Implicit-feedback ALS factors; the trace holds the objective after the
    /// initial state and every half-iteration.
    Als {
        alpha: f64,
        lambda: f64,
        objective_trace: Vec<f64>,
    },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::SvdAbsorbed { .. } => "svd-absorbed",
            ModelKind::Als { .. } => "als",
        }
    }
}

/// Paired embedding matrices whose dot products approximate the interaction
/// matrix: X ~ left_star . right_star^T.
#[derive(Debug, Clone)]
pub struct CoEmbeddingModel {
    pub left_star: EmbeddingMatrix,
    pub right_star: EmbeddingMatrix,
    pub kind: ModelKind,
}

impl CoEmbeddingModel {
    pub fn dim(&self) -> usize {
        self.left_star.dim()
    }
}

/// Absorbs the square roots of the singular values into both factors:
/// U* = U diag(sqrt(sigma)), V* = V diag(sqrt(sigma)), so that
/// U* V*^T = U diag(sigma) V^T.
pub fn absorb(svd: &SvdModel) -> Result<CoEmbeddingModel> {
    let k = svd.rank();
    let scale: Vec<f64> = svd.singular_values.iter().map(|s| s.sqrt()).collect();
    let absorb_side = |emb: &EmbeddingMatrix| -> Result<EmbeddingMatrix> {
        let mut values = Vec::with_capacity(emb.len() * k);
        for i in 0..emb.len() {
            let row = emb.row(i);
            values.extend((0..k).map(|t| row[t] * scale[t]));
        }
        EmbeddingMatrix::from_values(emb.vocab().clone(), k, values)
    };
    Ok(CoEmbeddingModel {
        left_star: absorb_side(&svd.left)?,
        right_star: absorb_side(&svd.right)?,
        kind: ModelKind::SvdAbsorbed {
            singular_values: svd.singular_values.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::EntityVocab;

    fn toy_svd(sigma: Vec<f64>, u: Vec<f64>, v: Vec<f64>, n: usize, m: usize) -> SvdModel {
        let k = sigma.len();
        let uv = EntityVocab::from_keys((0..n).map(|i| format!("u{i}")));
        let vv = EntityVocab::from_keys((0..m).map(|i| format!("v{i}")));
        SvdModel {
            left: EmbeddingMatrix::from_values(uv, k, u).unwrap(),
            singular_values: sigma,
            right: EmbeddingMatrix::from_values(vv, k, v).unwrap(),
            requested_rank: k,
        }
    }

    #[test]
    fn absorb_scales_by_sqrt_sigma() {
        let svd = toy_svd(vec![4.0], vec![0.6, 0.8], vec![1.0], 2, 1);
        let co = absorb(&svd).unwrap();
        assert_eq!(co.left_star.row(0), &[1.2]);
        assert_eq!(co.left_star.row(1), &[1.6]);
        assert_eq!(co.right_star.row(0), &[2.0]);
        assert_eq!(co.kind.name(), "svd-absorbed");
    }

    #[test]
    fn absorb_identity_when_sigma_is_one() {
        let svd = toy_svd(
            vec![1.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0, 0.0],
            2,
            2,
        );
        let co = absorb(&svd).unwrap();
        assert_eq!(co.left_star.values(), svd.left.values());
        assert_eq!(co.right_star.values(), svd.right.values());
    }

    #[test]
    fn absorbed_product_reproduces_u_sigma_vt() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (n, m, k) = (6, 5, 3);
        let u: Vec<f64> = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sigma = vec![3.0, 2.0, 0.5];
        let svd = toy_svd(sigma.clone(), u.clone(), v.clone(), n, m);
        let co = absorb(&svd).unwrap();
        for i in 0..n {
            for j in 0..m {
                let direct: f64 = (0..k).map(|t| sigma[t] * u[i * k + t] * v[j * k + t]).sum();
                let star: f64 = co
                    .left_star
                    .row(i)
                    .iter()
                    .zip(co.right_star.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                assert!((direct - star).abs() <= 1e-9, "({i},{j}): {direct} vs {star}");
            }
        }
    }
}
