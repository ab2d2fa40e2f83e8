//! On-disk layout for factorization and autoencoder models.
//!
//! A factorization model directory holds `left.emb` and `right.emb` in the
//! binary embedding format plus `manifest.json` recording kind,
//! hyperparameters, seed, and input digest. An autoencoder directory holds
//! `manifest.json` plus one flat little-endian f32 blob per layer
//! (`enc_0.bin`, ..., `dec_0.bin`, ...), each weights-then-bias.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::democratize::{AutoencoderModel, DenseLayer};
use crate::error::{Error, Result};
use crate::factorize::{CoEmbeddingModel, ModelKind};
use crate::io::{read_embedding_binary, write_embedding_binary};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LEFT_FILE: &str = "left.emb";
pub const RIGHT_FILE: &str = "right.emb";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    /// "svd-absorbed", "als", or "cooccur".
    pub kind: String,
    pub dim: usize,
    pub seed: u64,
    pub created_at: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input_digest: Option<String>,
    pub hyperparameters: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub singular_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
}

/// Writes a co-embedding model directory (left/right tables plus manifest).
pub fn save_model(
    dir: &Path,
    model: &CoEmbeddingModel,
    seed: u64,
    input_digest: Option<String>,
    hyperparameters: serde_json::Value,
    clock: &Clock,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_embedding_binary(&dir.join(LEFT_FILE), &model.left_star)?;
    write_embedding_binary(&dir.join(RIGHT_FILE), &model.right_star)?;
    let (singular_values, alpha, lambda) = match &model.kind {
        ModelKind::SvdAbsorbed { singular_values } => {
            (Some(singular_values.clone()), None, None)
        }
        ModelKind::Als { alpha, lambda, .. } => (None, Some(*alpha), Some(*lambda)),
    };
    let manifest = ModelManifest {
        kind: model.kind.name().to_owned(),
        dim: model.dim(),
        seed,
        created_at: clock.now(),
        input_digest,
        hyperparameters,
        singular_values,
        alpha,
        lambda,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Writes a plain co-embedding pair (e.g. co-occurrence tables) with a
/// caller-provided kind string.
pub fn save_embedding_pair(
    dir: &Path,
    kind: &str,
    left: &crate::embedding::EmbeddingMatrix,
    right: &crate::embedding::EmbeddingMatrix,
    seed: u64,
    input_digest: Option<String>,
    hyperparameters: serde_json::Value,
    clock: &Clock,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_embedding_binary(&dir.join(LEFT_FILE), left)?;
    write_embedding_binary(&dir.join(RIGHT_FILE), right)?;
    let manifest = ModelManifest {
        kind: kind.to_owned(),
        dim: left.dim(),
        seed,
        created_at: clock.now(),
        input_digest,
        hyperparameters,
        singular_values: None,
        alpha: None,
        lambda: None,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Loads a factorization model directory back into a co-embedding model.
/// The ALS objective trace is a training artifact and is not persisted.
pub fn load_model(dir: &Path) -> Result<(CoEmbeddingModel, ModelManifest)> {
    let manifest: ModelManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let left_star = read_embedding_binary(&dir.join(LEFT_FILE))?;
    let right_star = read_embedding_binary(&dir.join(RIGHT_FILE))?;
    let kind = match manifest.kind.as_str() {
        "svd-absorbed" => ModelKind::SvdAbsorbed {
            singular_values: manifest
                .singular_values
                .clone()
                .ok_or_else(|| Error::Format("svd manifest missing singular_values".into()))?,
        },
        "als" => ModelKind::Als {
            alpha: manifest
                .alpha
                .ok_or_else(|| Error::Format("als manifest missing alpha".into()))?,
            lambda: manifest
                .lambda
                .ok_or_else(|| Error::Format("als manifest missing lambda".into()))?,
            objective_trace: Vec::new(),
        },
        other => {
            return Err(Error::Format(format!(
                "'{other}' models have no fold-in state; load the embedding files directly"
            )))
        }
    };
    Ok((
        CoEmbeddingModel {
            left_star,
            right_star,
            kind,
        },
        manifest,
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutoencoderManifest {
    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub created_at: String,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub loss_trace: Vec<f64>,
}

pub fn save_autoencoder(
    dir: &Path,
    model: &AutoencoderModel,
    spec: &crate::democratize::AutoencoderSpec,
    clock: &Clock,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = AutoencoderManifest {
        layer_dims: model.layer_dims.clone(),
        learning_rate: spec.learning_rate,
        epochs: spec.epochs,
        batch_size: spec.batch_size,
        seed: spec.seed,
        created_at: clock.now(),
        means: model.means.clone(),
        stds: model.stds.clone(),
        loss_trace: model.loss_trace.clone(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    for (i, layer) in model.encoder.iter().enumerate() {
        write_layer(&dir.join(format!("enc_{i}.bin")), layer)?;
    }
    for (i, layer) in model.decoder.iter().enumerate() {
        write_layer(&dir.join(format!("dec_{i}.bin")), layer)?;
    }
    Ok(())
}

pub fn load_autoencoder(dir: &Path) -> Result<AutoencoderModel> {
    let manifest: AutoencoderManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let dims = &manifest.layer_dims;
    if dims.len() < 2 {
        return Err(Error::Format("autoencoder manifest has no layers".into()));
    }
    let mut encoder = Vec::with_capacity(dims.len() - 1);
    for (i, w) in dims.windows(2).enumerate() {
        encoder.push(read_layer(&dir.join(format!("enc_{i}.bin")), w[0], w[1])?);
    }
    let mut decoder = Vec::with_capacity(dims.len() - 1);
    for (i, w) in dims.windows(2).rev().enumerate() {
        decoder.push(read_layer(&dir.join(format!("dec_{i}.bin")), w[1], w[0])?);
    }
    Ok(AutoencoderModel {
        layer_dims: manifest.layer_dims,
        encoder,
        decoder,
        means: manifest.means,
        stds: manifest.stds,
        loss_trace: manifest.loss_trace,
    })
}

fn write_layer(path: &Path, layer: &DenseLayer) -> Result<()> {
    let mut buf = Vec::with_capacity((layer.w.len() + layer.b.len()) * 4);
    for v in layer.w.iter().chain(&layer.b) {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn read_layer(path: &Path, in_dim: usize, out_dim: usize) -> Result<DenseLayer> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let expected = (in_dim * out_dim + out_dim) * 4;
    let mut buf = Vec::with_capacity(expected);
    file.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    if buf.len() != expected {
        return Err(Error::Format(format!(
            "{}: expected {expected} bytes, got {}",
            path.display(),
            buf.len()
        )));
    }
    let floats: Vec<f64> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let (w, b) = floats.split_at(in_dim * out_dim);
    Ok(DenseLayer {
        w: w.to_vec(),
        b: b.to_vec(),
        in_dim,
        out_dim,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(json.as_bytes()).map_err(|e| Error::io(path, e))?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::democratize::{train_autoencoder, AutoencoderSpec};
    use crate::factorize::{absorb, implicit_als, truncated_svd, AlsParams};
    use crate::matrix::consolidate;
    use crate::vocab::EntityVocab;
    use crate::EmbeddingMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_model_round_trip() {
        let m = consolidate(&[
            ("a", "x", 1.0),
            ("b", "y", 2.0),
            ("a", "y", 0.5),
            ("c", "z", 3.0),
        ])
        .unwrap();
        let model = absorb(&truncated_svd(&m, 2, 10, 2, 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(
            dir.path(),
            &model,
            1,
            Some("digest".into()),
            serde_json::json!({"rank": 2}),
            &Clock::fixed_from_seed(0),
        )
        .unwrap();
        let (back, manifest) = load_model(dir.path()).unwrap();
        assert_eq!(manifest.kind, "svd-absorbed");
        assert_eq!(back.dim(), model.dim());
        assert_eq!(back.left_star.vocab(), model.left_star.vocab());
        // f32 storage: values agree to single precision
        for i in 0..model.left_star.len() {
            for (a, b) in back.left_star.row(i).iter().zip(model.left_star.row(i)) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
        }
        match back.kind {
            crate::factorize::ModelKind::SvdAbsorbed { ref singular_values } => {
                // singular values live in the manifest at full precision
                let crate::factorize::ModelKind::SvdAbsorbed {
                    singular_values: ref orig,
                } = model.kind
                else {
                    unreachable!()
                };
                assert_eq!(singular_values, orig);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn als_model_round_trip_keeps_hyperparameters() {
        let m = consolidate(&[("a", "x", 1.0), ("b", "y", 2.0)]).unwrap();
        let model = implicit_als(
            &m,
            AlsParams {
                rank: 2,
                alpha: 13.0,
                lambda: 0.25,
                iters: 2,
                seed: 3,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(
            dir.path(),
            &model,
            3,
            None,
            serde_json::json!({}),
            &Clock::fixed_from_seed(0),
        )
        .unwrap();
        let (back, manifest) = load_model(dir.path()).unwrap();
        assert_eq!(manifest.kind, "als");
        match back.kind {
            crate::factorize::ModelKind::Als { alpha, lambda, .. } => {
                assert_eq!(alpha, 13.0);
                assert_eq!(lambda, 0.25);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn autoencoder_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vocab = EntityVocab::from_keys((0..40).map(|i| format!("r{i}")));
        let values: Vec<f64> = (0..40 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = EmbeddingMatrix::from_values(vocab, 6, values).unwrap();
        let mut spec = AutoencoderSpec::new(vec![6, 4, 2]);
        spec.epochs = 3;
        spec.batch_size = 10;
        let model = train_autoencoder(&data, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_autoencoder(dir.path(), &model, &spec, &Clock::fixed_from_seed(0)).unwrap();
        let back = load_autoencoder(dir.path()).unwrap();
        assert_eq!(back.layer_dims, model.layer_dims);
        assert_eq!(back.loss_trace, model.loss_trace);
        // encoded representations agree to f32 precision
        let x = data.row(0);
        let a = model.encode_at_layer(x, 2).unwrap();
        let b = back.encode_at_layer(x, 2).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-5 * u.abs().max(1.0), "{u} vs {v}");
        }
    }
}
