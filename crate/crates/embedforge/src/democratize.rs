//! Deep autoencoder that compresses a high-dimensional embedding into nested
//! lower-dimensional representations, one per encoder layer.
//!
//! The encoder walks a strictly decreasing ladder of layer widths with relu
//! activations; the decoder mirrors it with an identity output layer. Inputs
//! are standardized per coordinate with statistics stored in the model, and
//! training minimizes mean squared reconstruction error by plain mini-batch
//! gradient descent.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AutoencoderSpec {
    /// Widths from input to bottleneck, strictly decreasing.
    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl AutoencoderSpec {
    pub fn new(layer_dims: Vec<usize>) -> Self {
        Self {
            layer_dims,
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 64,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::InvalidParameter(
                "need an input layer and at least one encoder layer".into(),
            ));
        }
        for w in self.layer_dims.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::InvalidParameter(format!(
                    "layer widths must strictly decrease, got {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter("layer width 0".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter("learning rate must be > 0".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidParameter(
                "epochs and batch size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One dense layer, weights stored row-major (in_dim x out_dim).
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    fn xavier(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            w: (0..in_dim * out_dim)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// z = x W + b
    fn affine(&self, x: &[f64], z: &mut Vec<f64>) {
        z.clear();
        z.extend_from_slice(&self.b);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w[i * self.out_dim..(i + 1) * self.out_dim];
            for (zt, wt) in z.iter_mut().zip(row) {
                *zt += xi * wt;
            }
        }
    }
}

/// Per-layer parameter gradients, in encoder-then-decoder order.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AutoencoderModel {
    pub layer_dims: Vec<usize>,
    pub encoder: Vec<DenseLayer>,
    pub decoder: Vec<DenseLayer>,
    /// Per-coordinate standardization statistics from the training data.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Mean training loss per epoch (standardized space).
    pub loss_trace: Vec<f64>,
}

impl AutoencoderModel {
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Index of the bottleneck layer; valid encode layers are 0..=this.
    pub fn bottleneck_layer(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn unstandardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// Applies encoder layers 1..=layer to a raw input; layer 0 returns the
    /// input unchanged. Standardization happens before the first layer.
    pub fn encode_at_layer(&self, x: &[f64], layer: usize) -> Result<Vec<f64>> {
        if layer > self.bottleneck_layer() {
            return Err(Error::LayerOutOfRange {
                layer,
                max: self.bottleneck_layer(),
            });
        }
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if layer == 0 {
            return Ok(x.to_vec());
        }
        let mut a = self.standardize(x);
        let mut z = Vec::new();
        for l in &self.encoder[..layer] {
            l.affine(&a, &mut z);
            a.clear();
            a.extend(z.iter().map(|&v| v.max(0.0)));
        }
        Ok(a)
    }

    /// Decodes a bottleneck code back to standardized input space.
    pub fn decode(&self, code: &[f64]) -> Result<Vec<f64>> {
        if code.len() != *self.layer_dims.last().unwrap() {
            return Err(Error::DimensionMismatch {
                expected: *self.layer_dims.last().unwrap(),
                got: code.len(),
            });
        }
        let mut a = code.to_vec();
        let mut z = Vec::new();
        let last = self.decoder.len() - 1;
        for (l, layer) in self.decoder.iter().enumerate() {
            layer.affine(&a, &mut z);
            a.clear();
            if l == last {
                a.extend_from_slice(&z);
            } else {
                a.extend(z.iter().map(|&v| v.max(0.0)));
            }
        }
        Ok(a)
    }

    /// Round trip through the bottleneck, back in the original input space.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        let code = self.encode_at_layer(x, self.bottleneck_layer())?;
        let y = self.decode(&code)?;
        Ok(self.unstandardize(&y))
    }

    /// Mean squared reconstruction error over raw rows, in standardized
    /// space; this is the quantity training minimizes.
    pub fn batch_loss(&self, rows: &[&[f64]]) -> Result<f64> {
        Ok(self.forward_backward(rows, false)?.0)
    }

    /// Loss and parameter gradients for a batch, layers ordered encoder then
    /// decoder.
    pub fn batch_loss_and_grads(&self, rows: &[&[f64]]) -> Result<(f64, Vec<LayerGrads>)> {
        let (loss, grads) = self.forward_backward(rows, true)?;
        Ok((loss, grads.expect("gradients requested")))
    }

    /// Smallest |pre-activation| over every relu in the network for the given
    /// rows; finite-difference checks are only trustworthy away from kinks.
    pub fn min_abs_preactivation(&self, rows: &[&[f64]]) -> Result<f64> {
        let mut min_abs = f64::INFINITY;
        let mut z = Vec::new();
        for &row in rows {
            let mut a = self.standardize(row);
            let n_layers = self.encoder.len() + self.decoder.len();
            for (idx, layer) in self.encoder.iter().chain(&self.decoder).enumerate() {
                layer.affine(&a, &mut z);
                if idx + 1 < n_layers {
                    for &v in z.iter() {
                        min_abs = min_abs.min(v.abs());
                    }
                }
                a.clear();
                if idx + 1 < n_layers {
                    a.extend(z.iter().map(|&v| v.max(0.0)));
                } else {
                    a.extend_from_slice(&z);
                }
            }
        }
        Ok(min_abs)
    }

    fn forward_backward(
        &self,
        rows: &[&[f64]],
        want_grads: bool,
    ) -> Result<(f64, Option<Vec<LayerGrads>>)> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("empty batch".into()));
        }
        for row in rows {
            if row.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: row.len(),
                });
            }
        }
        let layers: Vec<&DenseLayer> = self.encoder.iter().chain(&self.decoder).collect();
        let n_layers = layers.len();
        let mut grads: Vec<LayerGrads> = layers
            .iter()
            .map(|l| LayerGrads {
                w: vec![0.0; if want_grads { l.w.len() } else { 0 }],
                b: vec![0.0; if want_grads { l.b.len() } else { 0 }],
            })
            .collect();

        let d0 = self.input_dim() as f64;
        let norm = 1.0 / (rows.len() as f64 * d0);
        let mut loss = 0.0;
        let mut z = Vec::new();
        for &row in rows {
            let x = self.standardize(row);
            // forward, keeping inputs and pre-activations per layer
            let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
            let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
            let mut a = x.clone();
            for (idx, layer) in layers.iter().enumerate() {
                layer.affine(&a, &mut z);
                inputs.push(a.clone());
                pre.push(z.clone());
                a.clear();
                if idx + 1 < n_layers {
                    a.extend(z.iter().map(|&v| v.max(0.0)));
                } else {
                    a.extend_from_slice(&z);
                }
            }
            let y = &a;
            for (yt, xt) in y.iter().zip(&x) {
                loss += norm * (yt - xt) * (yt - xt);
            }
            if !want_grads {
                continue;
            }
            // backward
            let mut delta: Vec<f64> = y
                .iter()
                .zip(&x)
                .map(|(yt, xt)| 2.0 * norm * (yt - xt))
                .collect();
            for idx in (0..n_layers).rev() {
                let layer = layers[idx];
                // delta is w.r.t. this layer's output activation; fold in relu
                if idx + 1 < n_layers {
                    for (d, &zv) in delta.iter_mut().zip(&pre[idx]) {
                        if zv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                }
                let g = &mut grads[idx];
                let input = &inputs[idx];
                for (i, &xi) in input.iter().enumerate() {
                    if xi != 0.0 {
                        let grow = &mut g.w[i * layer.out_dim..(i + 1) * layer.out_dim];
                        for (gw, d) in grow.iter_mut().zip(&delta) {
                            *gw += xi * d;
                        }
                    }
                }
                for (gb, d) in g.b.iter_mut().zip(&delta) {
                    *gb += d;
                }
                if idx > 0 {
                    let mut prev = vec![0.0; layer.in_dim];
                    for (i, p) in prev.iter_mut().enumerate() {
                        let row = &layer.w[i * layer.out_dim..(i + 1) * layer.out_dim];
                        *p = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                    }
                    delta = prev;
                }
            }
        }
        Ok((loss, want_grads.then_some(grads)))
    }
}

/// Trains the autoencoder by mini-batch gradient descent with a fixed
/// learning rate, recording the mean loss per epoch. Aborts when the loss
/// stops being finite. Deterministic for a fixed seed.
pub fn train_autoencoder(
    data: &EmbeddingMatrix,
    spec: &AutoencoderSpec,
) -> Result<AutoencoderModel> {
    spec.validate()?;
    if data.dim() != spec.layer_dims[0] {
        return Err(Error::DimensionMismatch {
            expected: spec.layer_dims[0],
            got: data.dim(),
        });
    }
    if data.len() < spec.batch_size {
        return Err(Error::InvalidParameter(format!(
            "data rows ({}) below batch size ({})",
            data.len(),
            spec.batch_size
        )));
    }

    let n = data.len();
    let d = data.dim();
    let mut means = vec![0.0; d];
    for i in 0..n {
        for (m, v) in means.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; d];
    for i in 0..n {
        for (s, (v, m)) in stds.iter_mut().zip(data.row(i).iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in stds.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0; // constant coordinate
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ladder = &spec.layer_dims;
    let encoder: Vec<DenseLayer> = ladder
        .windows(2)
        .map(|w| DenseLayer::xavier(w[0], w[1], &mut rng))
        .collect();
    let decoder: Vec<DenseLayer> = ladder
        .windows(2)
        .rev()
        .map(|w| DenseLayer::xavier(w[1], w[0], &mut rng))
        .collect();
    let mut model = AutoencoderModel {
        layer_dims: ladder.clone(),
        encoder,
        decoder,
        means,
        stds,
        loss_trace: Vec::with_capacity(spec.epochs),
    };

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, chunk) in order.chunks(spec.batch_size).enumerate() {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| data.row(i)).collect();
            let (loss, grads) = model.batch_loss_and_grads(&rows)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "loss became non-finite at epoch {epoch}, batch {batch_no}"
                )));
            }
            epoch_loss += loss * rows.len() as f64;
            let n_enc = model.encoder.len();
            for (idx, g) in grads.iter().enumerate() {
                let layer = if idx < n_enc {
                    &mut model.encoder[idx]
                } else {
                    &mut model.decoder[idx - n_enc]
                };
                for (w, gw) in layer.w.iter_mut().zip(&g.w) {
                    *w -= spec.learning_rate * gw;
                }
                for (b, gb) in layer.b.iter_mut().zip(&g.b) {
                    *b -= spec.learning_rate * gb;
                }
            }
        }
        model.loss_trace.push(epoch_loss / n as f64);
    }
    Ok(model)
}

/// Row-wise [`AutoencoderModel::encode_at_layer`] over a whole embedding,
/// preserving the vocabulary.
pub fn compress_embedding(
    model: &AutoencoderModel,
    emb: &EmbeddingMatrix,
    layer: usize,
) -> Result<EmbeddingMatrix> {
    if emb.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: emb.dim(),
        });
    }
    let out_dim = model.layer_dims[layer.min(model.layer_dims.len() - 1)];
    let mut values = Vec::with_capacity(emb.len() * out_dim);
    for i in 0..emb.len() {
        values.extend(model.encode_at_layer(emb.row(i), layer)?);
    }
    EmbeddingMatrix::from_values(emb.vocab().clone(), out_dim, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::EntityVocab;

    fn data_matrix(rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
        let dim = rows[0].len();
        let vocab = EntityVocab::from_keys((0..rows.len()).map(|i| format!("r{i}")));
        EmbeddingMatrix::from_values(vocab, dim, rows.into_iter().flatten().collect()).unwrap()
    }

    fn subspace_data(n: usize, ambient: usize, latent: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis: Vec<Vec<f64>> = (0..latent)
            .map(|_| (0..ambient).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let coeffs: Vec<f64> =
                    (0..latent).map(|_| rng.random_range(-1.0..1.0)).collect();
                (0..ambient)
                    .map(|d| (0..latent).map(|l| coeffs[l] * basis[l][d]).sum())
                    .collect()
            })
            .collect();
        data_matrix(rows)
    }

    #[test]
    fn spec_validation() {
        assert!(AutoencoderSpec::new(vec![8, 4, 2]).validate().is_ok());
        assert!(AutoencoderSpec::new(vec![8]).validate().is_err());
        assert!(AutoencoderSpec::new(vec![8, 8]).validate().is_err());
        assert!(AutoencoderSpec::new(vec![4, 8]).validate().is_err());
    }

    #[test]
    fn all_zero_data_trains_to_tiny_loss() {
        let data = data_matrix(vec![vec![0.0; 8]; 16]);
        let mut spec = AutoencoderSpec::new(vec![8, 4]);
        spec.batch_size = 8;
        spec.epochs = 5;
        let model = train_autoencoder(&data, &spec).unwrap();
        // zero-variance coordinates standardize to 0, so loss starts at ~0
        assert!(*model.loss_trace.last().unwrap() <= 1e-6);
    }

    #[test]
    fn subspace_is_recovered_through_the_bottleneck() {
        let data = subspace_data(300, 16, 3, 7);
        let mut spec = AutoencoderSpec::new(vec![16, 8, 5]);
        spec.epochs = 300;
        spec.batch_size = 32;
        spec.learning_rate = 0.02;
        spec.seed = 7;
        let model = train_autoencoder(&data, &spec).unwrap();
        // standardized-space loss against unit per-coordinate variance
        let final_loss = *model.loss_trace.last().unwrap();
        assert!(final_loss <= 0.05, "final loss {final_loss}");
    }

    #[test]
    fn loss_trace_is_non_increasing_within_slack() {
        let data = subspace_data(200, 12, 4, 8);
        let mut spec = AutoencoderSpec::new(vec![12, 6]);
        spec.epochs = 50;
        spec.batch_size = 32;
        spec.seed = 8;
        let model = train_autoencoder(&data, &spec).unwrap();
        for w in model.loss_trace.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "loss jump {} -> {}", w[0], w[1]);
        }
        assert!(model.loss_trace.last().unwrap() <= model.loss_trace.first().unwrap());
    }

    #[test]
    fn encode_layer_zero_is_identity_and_layer_one_is_relu_affine() {
        let data = subspace_data(100, 6, 2, 9);
        let mut spec = AutoencoderSpec::new(vec![6, 3]);
        spec.epochs = 3;
        spec.batch_size = 10;
        let model = train_autoencoder(&data, &spec).unwrap();
        let x: Vec<f64> = data.row(0).to_vec();
        assert_eq!(model.encode_at_layer(&x, 0).unwrap(), x);
        let got = model.encode_at_layer(&x, 1).unwrap();
        let std = model.standardize(&x);
        let layer = &model.encoder[0];
        for t in 0..3 {
            let z: f64 = (0..6).map(|i| std[i] * layer.w[i * 3 + t]).sum::<f64>() + layer.b[t];
            assert!((got[t] - z.max(0.0)).abs() <= 1e-12);
        }
        assert!(matches!(
            model.encode_at_layer(&x, 5),
            Err(Error::LayerOutOfRange { .. })
        ));
    }

    #[test]
    fn bottleneck_round_trip_matches_training_loss() {
        let data = subspace_data(120, 10, 3, 10);
        let mut spec = AutoencoderSpec::new(vec![10, 5]);
        spec.epochs = 20;
        spec.batch_size = 24;
        let model = train_autoencoder(&data, &spec).unwrap();
        let rows: Vec<&[f64]> = (0..data.len()).map(|i| data.row(i)).collect();
        let direct = model.batch_loss(&rows).unwrap();
        // recompute via encode/decode per row
        let mut manual = 0.0;
        for &row in &rows {
            let code = model.encode_at_layer(row, model.bottleneck_layer()).unwrap();
            let y = model.decode(&code).unwrap();
            let x = model.standardize(row);
            for (a, b) in y.iter().zip(&x) {
                manual += (a - b) * (a - b);
            }
        }
        manual /= (rows.len() * data.dim()) as f64;
        assert!((direct - manual).abs() <= 1e-12);
    }

    /// Model with random parameters and nonzero biases; gradient correctness
    /// does not depend on trained weights.
    fn random_model(dims: &[usize], seed: u64) -> AutoencoderModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mk = |inp: usize, out: usize| {
            let mut l = DenseLayer::xavier(inp, out, &mut rng);
            for b in l.b.iter_mut() {
                *b = rng.random_range(0.05..0.4) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
            l
        };
        let encoder = dims.windows(2).map(|w| mk(w[0], w[1])).collect();
        let decoder: Vec<DenseLayer> = dims
            .windows(2)
            .rev()
            .map(|w| mk(w[1], w[0]))
            .collect();
        AutoencoderModel {
            layer_dims: dims.to_vec(),
            encoder,
            decoder,
            means: vec![0.0; dims[0]],
            stds: vec![1.0; dims[0]],
            loss_trace: vec![],
        }
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = [6, 4, 3];
        // resample until every pre-activation clears the relu kink threshold
        let (model, batch) = (0..100)
            .find_map(|attempt| {
                let model = random_model(&dims, 100 + attempt);
                let mut data_rng = ChaCha8Rng::seed_from_u64(200 + attempt);
                let batch: Vec<Vec<f64>> = (0..4)
                    .map(|_| (0..6).map(|_| data_rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let rows: Vec<&[f64]> = batch.iter().map(|r| r.as_slice()).collect();
                (model.min_abs_preactivation(&rows).unwrap() > 1e-3).then_some((model, batch))
            })
            .expect("a kink-free fixture exists");
        let rows: Vec<&[f64]> = batch.iter().map(|r| r.as_slice()).collect();
        let (_, grads) = model.batch_loss_and_grads(&rows).unwrap();
        let h = 1e-6;
        let n_enc = model.encoder.len();
        // finite-difference probes over every layer
        for layer_idx in 0..grads.len() {
            for _ in 0..6 {
                let g = &grads[layer_idx];
                let check_weight = rng.random::<bool>();
                let slot_idx = if check_weight {
                    rng.random_range(0..g.w.len())
                } else {
                    rng.random_range(0..g.b.len())
                };
                let analytic = if check_weight { g.w[slot_idx] } else { g.b[slot_idx] };
                let eval_at = |delta: f64| -> f64 {
                    let mut probe = model.clone();
                    {
                        let layer = if layer_idx < n_enc {
                            &mut probe.encoder[layer_idx]
                        } else {
                            &mut probe.decoder[layer_idx - n_enc]
                        };
                        if check_weight {
                            layer.w[slot_idx] += delta;
                        } else {
                            layer.b[slot_idx] += delta;
                        }
                    }
                    probe.batch_loss(&rows).unwrap()
                };
                let fd = (eval_at(h) - eval_at(-h)) / (2.0 * h);
                assert!(
                    (analytic - fd).abs() <= 1e-5 * analytic.abs().max(1.0),
                    "layer {layer_idx} slot {slot_idx}: analytic {analytic} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn nested_prefix_property() {
        let data = subspace_data(64, 10, 3, 12);
        let mut spec = AutoencoderSpec::new(vec![10, 7, 4, 2]);
        spec.epochs = 3;
        spec.batch_size = 16;
        let model = train_autoencoder(&data, &spec).unwrap();
        let x = data.row(5);
        // encode_at_layer(x, j) must equal the prefix of the full encoding path
        let mut a = model.standardize(x);
        let mut z = Vec::new();
        for (j, layer) in model.encoder.iter().enumerate() {
            layer.affine(&a, &mut z);
            a.clear();
            a.extend(z.iter().map(|&v| v.max(0.0)));
            let direct = model.encode_at_layer(x, j + 1).unwrap();
            assert_eq!(direct, a, "prefix mismatch at layer {}", j + 1);
        }
    }

    #[test]
    fn compress_embedding_batches_rows() {
        let data = subspace_data(80, 8, 2, 13);
        let mut spec = AutoencoderSpec::new(vec![8, 4, 2]);
        spec.epochs = 3;
        spec.batch_size = 16;
        let model = train_autoencoder(&data, &spec).unwrap();
        let out = compress_embedding(&model, &data, 0).unwrap();
        assert_eq!(out.values(), data.values());
        let out = compress_embedding(&model, &data, 2).unwrap();
        assert_eq!(out.dim(), 2);
        assert_eq!(out.len(), data.len());
        assert!(out.all_finite());
        for i in 0..data.len() {
            assert_eq!(
                out.row(i),
                model.encode_at_layer(data.row(i), 2).unwrap().as_slice()
            );
        }
        // dim mismatch
        let wrong = subspace_data(10, 6, 2, 14);
        assert!(compress_embedding(&model, &wrong, 1).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let data = subspace_data(64, 6, 3, 15);
        let mut spec = AutoencoderSpec::new(vec![6, 3]);
        spec.learning_rate = 1e6;
        spec.epochs = 50;
        spec.batch_size = 16;
        match train_autoencoder(&data, &spec) {
            Err(Error::Divergence(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
