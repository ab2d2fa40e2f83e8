//! embedforge: train, fold-in, compress, benchmark, and version entity
//! embeddings from sparse interaction data.
//!
//! The crate is organized around a small set of building blocks:
//!
//! - [`matrix`]: entity vocabularies and sparse interaction matrices, with
//!   the pruning and normalization steps that prepare them for factorization.
//! - [`factorize`]: randomized truncated SVD and implicit-feedback ALS
//!   producing paired left/right co-embeddings.
//! - [`cooccur`]: negative-sampling co-occurrence embeddings (direct pairs,
//!   bag-of-features, and single-entity skipgram).
//! - [`foldin`]: assigning embeddings to new entities against a frozen
//!   factorization, plus lookalike quantile features.
//! - [`democratize`]: a deep autoencoder that compresses one embedding into
//!   nested lower-dimensional representations, one per encoder layer.
//! - [`bench`]: similarity metrics, probe classifiers, ranking metrics, and
//!   drift overlap analysis.
//! - [`registry`]: a file-based versioned embedding store.
//! - [`pipeline`]: a config-driven runner binding the pieces into
//!   reproducible end-to-end workflows.

pub mod bench;
pub mod clock;
pub mod cooccur;
pub mod democratize;
pub mod embedding;
pub mod error;
pub mod factorize;
pub mod foldin;
pub mod io;
pub mod matrix;
pub mod model_io;
pub mod pipeline;
pub mod registry;
pub mod vocab;

pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use matrix::{consolidate, SparseInteractionMatrix};
pub use vocab::EntityVocab;
