//! L2-regularized logistic regression probe, fit by full-batch gradient
//! descent with a Lipschitz-derived step size. Features are standardized
//! per dimension from the training data, so probe quality does not depend
//! on per-coordinate embedding scales.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LogisticProbe {
    /// Weights in standardized feature space.
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Per-dimension training means subtracted before scoring.
    pub means: Vec<f64>,
    /// Per-dimension training scales divided out before scoring.
    pub stds: Vec<f64>,
    /// False when the gradient norm had not dropped below tolerance within
    /// the iteration budget.
    pub converged: bool,
}

impl LogisticProbe {
    /// Decision score (logit) for one sample.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x.iter().zip(self.means.iter().zip(&self.stds)))
            .map(|(w, (v, (m, s)))| w * (v - m) / s)
            .sum::<f64>()
            + self.bias
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log(1 + exp(x)) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean logistic loss plus (l2/2)|w|^2, with its gradients. The bias is
/// unregularized.
pub fn logistic_loss_grad(
    weights: &[f64],
    bias: f64,
    features: &[&[f64]],
    labels: &[bool],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let dim = weights.len();
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; dim];
    let mut grad_b = 0.0;
    for (x, &label) in features.iter().zip(labels) {
        let y = if label { 1.0 } else { -1.0 };
        let z: f64 = weights.iter().zip(*x).map(|(w, v)| w * v).sum::<f64>() + bias;
        loss += softplus(-y * z);
        let coeff = -y * sigmoid(-y * z);
        for (g, v) in grad_w.iter_mut().zip(*x) {
            *g += coeff * v;
        }
        grad_b += coeff;
    }
    loss /= n;
    grad_b /= n;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

/// Fits a logistic regression probe. Initialization is zero, so the fit is
/// deterministic; the step size is 1/L with L an upper bound on the loss
/// curvature over the standardized features.
pub fn train_probe(
    features: &[&[f64]],
    labels: &[bool],
    l2: f64,
    iters: usize,
) -> Result<LogisticProbe> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos < 2 || labels.len() - n_pos < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 samples per class".into(),
        ));
    }
    let dim = features[0].len();
    if features.iter().any(|x| x.len() != dim) {
        return Err(Error::InvalidParameter("ragged feature rows".into()));
    }
    if l2 < 0.0 {
        return Err(Error::InvalidParameter("l2 must be >= 0".into()));
    }

    let n = features.len() as f64;
    let mut means = vec![0.0; dim];
    for x in features {
        for (m, v) in means.iter_mut().zip(*x) {
            *m += v / n;
        }
    }
    let mut stds = vec![0.0; dim];
    for x in features {
        for (s, (v, m)) in stds.iter_mut().zip(x.iter().zip(&means)) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in stds.iter_mut() {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 1.0; // constant feature
        }
    }
    let standardized: Vec<Vec<f64>> = features
        .iter()
        .map(|x| {
            x.iter()
                .zip(means.iter().zip(&stds))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let std_refs: Vec<&[f64]> = standardized.iter().map(|x| x.as_slice()).collect();

    let max_sq_norm = std_refs
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0) // +1 for the bias column
        .fold(0.0f64, f64::max);
    let lr = 1.0 / (0.25 * max_sq_norm + l2);

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let tol = 1e-6;
    let mut converged = false;
    for _ in 0..iters {
        let (_, grad_w, grad_b) = logistic_loss_grad(&weights, bias, &std_refs, labels, l2);
        let grad_norm = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .map(|g| g.abs())
            .fold(0.0f64, f64::max);
        if grad_norm <= tol {
            converged = true;
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= lr * g;
        }
        bias -= lr * grad_b;
    }
    if !converged {
        let (_, grad_w, grad_b) = logistic_loss_grad(&weights, bias, &std_refs, labels, l2);
        converged = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .all(|g| g.abs() <= tol);
        if !converged {
            log::warn!("probe did not converge within {iters} iterations");
        }
    }
    Ok(LogisticProbe {
        weights,
        bias,
        means,
        stds,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::roc_auc;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_toy_set_reaches_auc_one() {
        let rows: Vec<Vec<f64>> = vec![
            vec![-2.0, 0.5],
            vec![-1.5, -0.5],
            vec![-1.0, 0.1],
            vec![1.0, 0.2],
            vec![1.5, -0.3],
            vec![2.0, 0.4],
        ];
        let features: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let labels = [false, false, false, true, true, true];
        let probe = train_probe(&features, &labels, 1e-4, 500).unwrap();
        let scores: Vec<f64> = features.iter().map(|x| probe.score(x)).collect();
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn random_labels_give_null_held_out_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 1000;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        let split = 800;
        let train_f: Vec<&[f64]> = rows[..split].iter().map(|r| r.as_slice()).collect();
        let probe = train_probe(&train_f, &labels[..split], 1e-4, 300).unwrap();
        let scores: Vec<f64> = rows[split..].iter().map(|x| probe.score(x)).collect();
        let auc = roc_auc(&scores, &labels[split..]).unwrap();
        assert!((0.45..=0.55).contains(&auc), "null AUC = {auc}");
    }

    #[test]
    fn probe_is_invariant_to_feature_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let n = 120;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[2] + 0.3 * r[0] > 0.0).collect();
        let features: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let probe = train_probe(&features, &labels, 1e-4, 400).unwrap();
        // scale each coordinate wildly and refit
        let scales = [1e3, 1e-3, 5.0, 1e2];
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(scales).map(|(v, s)| v * s).collect())
            .collect();
        let scaled_refs: Vec<&[f64]> = scaled.iter().map(|r| r.as_slice()).collect();
        let probe2 = train_probe(&scaled_refs, &labels, 1e-4, 400).unwrap();
        let s1: Vec<f64> = features.iter().map(|x| probe.score(x)).collect();
        let s2: Vec<f64> = scaled_refs.iter().map(|x| probe2.score(x)).collect();
        let a1 = roc_auc(&s1, &labels).unwrap();
        let a2 = roc_auc(&s2, &labels).unwrap();
        assert!((a1 - a2).abs() <= 1e-9, "{a1} vs {a2}");
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let features: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let labels: Vec<bool> = (0..12).map(|i| i % 2 == 0).collect();
        let weights: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
        let bias = 0.3;
        let l2 = 0.01;
        let (_, grad_w, grad_b) = logistic_loss_grad(&weights, bias, &features, &labels, l2);
        let h = 1e-6;
        for t in 0..4 {
            let mut wp = weights.clone();
            wp[t] += h;
            let mut wm = weights.clone();
            wm[t] -= h;
            let (lp, _, _) = logistic_loss_grad(&wp, bias, &features, &labels, l2);
            let (lm, _, _) = logistic_loss_grad(&wm, bias, &features, &labels, l2);
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                (grad_w[t] - fd).abs() <= 1e-6 * grad_w[t].abs().max(1.0),
                "w[{t}]: {} vs {fd}",
                grad_w[t]
            );
        }
        let (lp, _, _) = logistic_loss_grad(&weights, bias + h, &features, &labels, l2);
        let (lm, _, _) = logistic_loss_grad(&weights, bias - h, &features, &labels, l2);
        let fd = (lp - lm) / (2.0 * h);
        assert!((grad_b - fd).abs() <= 1e-6 * grad_b.abs().max(1.0));
    }

    #[test]
    fn rejects_class_starvation() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        let features: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert!(train_probe(&features, &[true, true, false], 0.0, 10).is_err());
    }
}
