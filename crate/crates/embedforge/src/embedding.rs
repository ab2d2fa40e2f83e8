use crate::error::{Error, Result};
use crate::vocab::EntityVocab;

/// A dense n x dim matrix of entity embeddings with an attached vocabulary.
///
/// Row `i` is the embedding of `vocab.key(i)`. Values are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: EntityVocab,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    /// All-zero matrix for the given vocab.
    pub fn zeros(vocab: EntityVocab, dim: usize) -> Self {
        let n = vocab.len();
        Self {
            vocab,
            dim,
            values: vec![0.0; n * dim],
        }
    }

    pub fn from_values(vocab: EntityVocab, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != vocab.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: vocab.len() * dim,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "embedding value {bad} is not finite"
            )));
        }
        Ok(Self { vocab, dim, values })
    }

    pub fn vocab(&self) -> &EntityVocab {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Embedding for `key`, if present.
    pub fn lookup(&self, key: &str) -> Option<&[f64]> {
        self.vocab.get(key).map(|i| self.row(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        (0..self.len()).map(|i| (self.vocab.key(i).unwrap(), self.row(i)))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
