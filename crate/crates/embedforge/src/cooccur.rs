//! Co-occurrence embedding trainer with negative sampling, covering direct
//! pairs, bag-of-features lookups, and single-entity skipgram streams.

use std::cell::UnsafeCell;
use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::vocab::EntityVocab;

/// A stream of (left entity, right entity, weight) co-occurrence events.
/// For skipgram streams the two vocabularies are identical.
#[derive(Debug, Clone)]
pub struct PairStream {
    pairs: Vec<(usize, usize, f64)>,
    left_vocab: EntityVocab,
    right_vocab: EntityVocab,
}

impl PairStream {
    /// Builds a stream from key records; vocabularies are assigned in
    /// first-seen order. Weights must be finite and positive.
    pub fn from_records<L, R>(records: &[(L, R, f64)]) -> Result<Self>
    where
        L: AsRef<str>,
        R: AsRef<str>,
    {
        let mut left_vocab = EntityVocab::new();
        let mut right_vocab = EntityVocab::new();
        let mut pairs = Vec::with_capacity(records.len());
        for (index, (l, r, w)) in records.iter().enumerate() {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::BadWeight {
                    index,
                    row: l.as_ref().to_owned(),
                    col: r.as_ref().to_owned(),
                    weight: *w,
                });
            }
            pairs.push((left_vocab.intern(l.as_ref()), right_vocab.intern(r.as_ref()), *w));
        }
        Ok(Self {
            pairs,
            left_vocab,
            right_vocab,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    pub fn left_vocab(&self) -> &EntityVocab {
        &self.left_vocab
    }

    pub fn right_vocab(&self) -> &EntityVocab {
        &self.right_vocab
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CooccurConfig {
    pub dim: usize,
    /// Negative samples per observed pair.
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Exponent applied to right-entity frequencies for negative sampling.
    pub exponent: f64,
    pub seed: u64,
    /// Entities whose total stream weight falls below this are dropped.
    pub min_count: usize,
    /// Context window, used when generating skipgram pairs.
    pub window: usize,
}

impl Default for CooccurConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            negatives: 5,
            learning_rate: 0.025,
            epochs: 5,
            exponent: 0.75,
            seed: 0,
            min_count: 1,
            window: 5,
        }
    }
}

impl CooccurConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(Error::InvalidParameter("negatives must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter("learning rate must be > 0".into()));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.exponent) {
            return Err(Error::InvalidParameter("exponent must be in [0, 1]".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log(sigmoid(x)) computed without overflow for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Per-pair negative-sampling objective:
/// log sigmoid(e1.e2) + sum_k log sigmoid(-e1.neg_k).
pub fn pair_objective(e1: &[f64], e2: &[f64], negs: &[&[f64]]) -> Result<f64> {
    for other in std::iter::once(&e2).chain(negs.iter()) {
        if other.len() != e1.len() {
            return Err(Error::DimensionMismatch {
                expected: e1.len(),
                got: other.len(),
            });
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut obj = log_sigmoid(dot(e1, e2));
    for neg in negs {
        obj += log_sigmoid(-dot(e1, neg));
    }
    Ok(obj)
}

/// Analytic gradients of [`pair_objective`] with respect to e1, e2, and each
/// negative row, treating every argument as an independent variable.
pub fn pair_gradients(
    e1: &[f64],
    e2: &[f64],
    negs: &[&[f64]],
) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    pair_objective(e1, e2, negs)?; // dimension check
    let dim = e1.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let g_pos = 1.0 - sigmoid(dot(e1, e2));
    let mut g1: Vec<f64> = (0..dim).map(|t| g_pos * e2[t]).collect();
    let g2: Vec<f64> = (0..dim).map(|t| g_pos * e1[t]).collect();
    let mut g_negs = Vec::with_capacity(negs.len());
    for neg in negs {
        let s = sigmoid(dot(e1, neg));
        for t in 0..dim {
            g1[t] -= s * neg[t];
        }
        g_negs.push((0..dim).map(|t| -s * e1[t]).collect());
    }
    Ok((g1, g2, g_negs))
}

/// One gradient-ascent step on the pair objective for rows `left` of E1 and
/// `right` plus `negs` of E2. All scores are taken before any update, and
/// updates to a row that appears several times (a negative equal to the
/// positive) accumulate.
pub fn sgd_step(
    e1: &mut EmbeddingMatrix,
    e2: &mut EmbeddingMatrix,
    left: usize,
    right: usize,
    negs: &[usize],
    lr: f64,
) -> Result<()> {
    if left >= e1.len() {
        return Err(Error::IndexOutOfBounds { index: left, size: e1.len() });
    }
    for &j in std::iter::once(&right).chain(negs) {
        if j >= e2.len() {
            return Err(Error::IndexOutOfBounds { index: j, size: e2.len() });
        }
    }
    let dim = e1.dim();
    let e1_row: Vec<f64> = e1.row(left).to_vec();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let g_pos = 1.0 - sigmoid(dot(&e1_row, e2.row(right)));
    let mut g1: Vec<f64> = e2.row(right).iter().map(|v| g_pos * v).collect();
    let mut right_updates: HashMap<usize, Vec<f64>> = HashMap::new();
    {
        let upd = right_updates.entry(right).or_insert_with(|| vec![0.0; dim]);
        for t in 0..dim {
            upd[t] += g_pos * e1_row[t];
        }
    }
    for &k in negs {
        let s = sigmoid(dot(&e1_row, e2.row(k)));
        let neg_row = e2.row(k);
        for t in 0..dim {
            g1[t] -= s * neg_row[t];
        }
        let upd = right_updates.entry(k).or_insert_with(|| vec![0.0; dim]);
        for t in 0..dim {
            upd[t] -= s * e1_row[t];
        }
    }

    let row = e1.row_mut(left);
    for t in 0..dim {
        row[t] += lr * g1[t];
    }
    let mut ordered: Vec<(usize, Vec<f64>)> = right_updates.into_iter().collect();
    ordered.sort_by_key(|(j, _)| *j);
    for (j, upd) in ordered {
        let row = e2.row_mut(j);
        for t in 0..dim {
            row[t] += lr * upd[t];
        }
    }
    Ok(())
}

/// Weighted discrete sampler drawing index `i` with probability
/// weight_i / sum(weights).
#[derive(Debug, Clone)]
pub struct WeightedSampler {
    cumulative: Vec<f64>,
}

impl WeightedSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("sampler needs at least one weight".into()));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut total = 0.0;
        for &w in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!("bad sampler weight {w}")));
            }
            total += w;
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(Error::EmptyInput("sampler weights sum to zero".into()));
        }
        Ok(Self { cumulative })
    }

    /// Sampler over `freqs` raised to `exponent`, the negative-sampling
    /// distribution.
    pub fn with_exponent(freqs: &[f64], exponent: f64) -> Result<Self> {
        let weights: Vec<f64> = freqs.iter().map(|f| f.powf(exponent)).collect();
        Self::new(&weights)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u: f64 = rng.random_range(0.0..total);
        self.cumulative.partition_point(|&c| c <= u)
    }
}

/// Outcome of min-count filtering: compacted vocabs and remapped pairs.
struct FilteredStream {
    pairs: Vec<(usize, usize, f64)>,
    left_vocab: EntityVocab,
    right_vocab: EntityVocab,
    right_freqs: Vec<f64>,
}

fn filter_stream(stream: &PairStream, min_count: usize) -> Result<FilteredStream> {
    let mut left_counts = vec![0.0; stream.left_vocab.len()];
    let mut right_counts = vec![0.0; stream.right_vocab.len()];
    for &(l, r, w) in &stream.pairs {
        left_counts[l] += w;
        right_counts[r] += w;
    }
    let threshold = min_count as f64;

    let mut left_vocab = EntityVocab::new();
    let mut right_vocab = EntityVocab::new();
    let mut left_map = vec![usize::MAX; left_counts.len()];
    let mut right_map = vec![usize::MAX; right_counts.len()];
    for (i, &c) in left_counts.iter().enumerate() {
        if c >= threshold {
            left_map[i] = left_vocab.intern(stream.left_vocab.key(i).unwrap());
        }
    }
    for (i, &c) in right_counts.iter().enumerate() {
        if c >= threshold {
            right_map[i] = right_vocab.intern(stream.right_vocab.key(i).unwrap());
        }
    }

    let mut pairs = Vec::with_capacity(stream.pairs.len());
    let mut right_freqs = vec![0.0; right_vocab.len()];
    for &(l, r, w) in &stream.pairs {
        if left_map[l] == usize::MAX || right_map[r] == usize::MAX {
            continue;
        }
        pairs.push((left_map[l], right_map[r], w));
        right_freqs[right_map[r]] += w;
    }
    if pairs.is_empty() || left_vocab.is_empty() || right_vocab.is_empty() {
        return Err(Error::EmptyInput(
            "no pairs survive min_count filtering".into(),
        ));
    }
    Ok(FilteredStream {
        pairs,
        left_vocab,
        right_vocab,
        right_freqs,
    })
}

fn init_table(vocab: EntityVocab, dim: usize, rng: &mut impl Rng) -> EmbeddingMatrix {
    let bound = 0.5 / dim as f64;
    let n = vocab.len();
    let values = (0..n * dim).map(|_| rng.random_range(-bound..bound)).collect();
    EmbeddingMatrix::from_values(vocab, dim, values).expect("finite init")
}

/// Trains co-embeddings over a pair stream. Negatives are drawn from right
/// entity frequencies raised to `config.exponent`; a pair of weight w gets w
/// SGD steps per epoch in expectation via weighted pair sampling; the
/// learning rate decays linearly to 1% of its starting value. Single-worker
/// and bit-reproducible for a fixed seed; see [`train_with_workers`] for the
/// asynchronous multi-worker variant.
pub fn train(
    stream: &PairStream,
    config: &CooccurConfig,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    config.validate()?;
    let filtered = filter_stream(stream, config.min_count)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut e1 = init_table(filtered.left_vocab.clone(), config.dim, &mut rng);
    let mut e2 = init_table(filtered.right_vocab.clone(), config.dim, &mut rng);

    let pair_weights: Vec<f64> = filtered.pairs.iter().map(|p| p.2).collect();
    let pair_sampler = WeightedSampler::new(&pair_weights)?;
    let neg_sampler = WeightedSampler::with_exponent(&filtered.right_freqs, config.exponent)?;

    let steps_per_epoch = (pair_weights.iter().sum::<f64>().round() as usize).max(1);
    let total_steps = steps_per_epoch * config.epochs;
    let lr_end = config.learning_rate / 100.0;
    let mut negs = vec![0usize; config.negatives];
    for step in 0..total_steps {
        let frac = step as f64 / total_steps as f64;
        let lr = config.learning_rate * (1.0 - frac) + lr_end * frac;
        let (l, r, _) = filtered.pairs[pair_sampler.sample(&mut rng)];
        for slot in negs.iter_mut() {
            *slot = neg_sampler.sample(&mut rng);
        }
        sgd_step(&mut e1, &mut e2, l, r, &negs, lr)?;
    }
    Ok((e1, e2))
}

/// Table of f64 values shared across unsynchronized workers. Concurrent
/// lock-free row updates race by construction (hogwild-style); the sparse
/// update pattern keeps the tables usable.
struct SharedTable {
    values: UnsafeCell<Vec<f64>>,
    dim: usize,
}

unsafe impl Sync for SharedTable {}

impl SharedTable {
    fn new(values: Vec<f64>, dim: usize) -> Self {
        Self {
            values: UnsafeCell::new(values),
            dim,
        }
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn row_mut(&self, i: usize) -> &mut [f64] {
        let values = &mut *self.values.get();
        &mut values[i * self.dim..(i + 1) * self.dim]
    }
}

/// Multi-worker variant of [`train`]: workers apply lock-free asynchronous
/// row updates, so results are not deterministic for `workers > 1`.
/// `workers <= 1` delegates to the deterministic single-worker path.
pub fn train_with_workers(
    stream: &PairStream,
    config: &CooccurConfig,
    workers: usize,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    if workers <= 1 {
        return train(stream, config);
    }
    config.validate()?;
    let filtered = filter_stream(stream, config.min_count)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let e1 = init_table(filtered.left_vocab.clone(), config.dim, &mut rng);
    let e2 = init_table(filtered.right_vocab.clone(), config.dim, &mut rng);
    let dim = config.dim;
    let shared1 = SharedTable::new(e1.values().to_vec(), dim);
    let shared2 = SharedTable::new(e2.values().to_vec(), dim);

    let pair_weights: Vec<f64> = filtered.pairs.iter().map(|p| p.2).collect();
    let pair_sampler = WeightedSampler::new(&pair_weights)?;
    let neg_sampler = WeightedSampler::with_exponent(&filtered.right_freqs, config.exponent)?;
    let steps_per_epoch = (pair_weights.iter().sum::<f64>().round() as usize).max(1);
    let total_steps = steps_per_epoch * config.epochs;
    let steps_per_worker = total_steps.div_ceil(workers);
    let lr_end = config.learning_rate / 100.0;
    let pairs = &filtered.pairs;

    std::thread::scope(|scope| {
        for worker in 0..workers {
            let (shared1, shared2) = (&shared1, &shared2);
            let (pair_sampler, neg_sampler) = (&pair_sampler, &neg_sampler);
            let config = config.clone();
            scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    config.seed ^ (worker as u64 + 1).wrapping_mul(0x9E37_79B9),
                );
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                let mut negs = vec![0usize; config.negatives];
                for step in 0..steps_per_worker {
                    let frac = step as f64 / steps_per_worker as f64;
                    let lr = config.learning_rate * (1.0 - frac) + lr_end * frac;
                    let (l, r, _) = pairs[pair_sampler.sample(&mut rng)];
                    for slot in negs.iter_mut() {
                        *slot = neg_sampler.sample(&mut rng);
                    }
                    unsafe {
                        let e1_row = shared1.row_mut(l);
                        let snapshot = e1_row.to_vec();
                        let pos = shared2.row_mut(r);
                        let g_pos = 1.0 - sigmoid(dot(&snapshot, pos));
                        for t in 0..dim {
                            e1_row[t] += lr * g_pos * pos[t];
                            pos[t] += lr * g_pos * snapshot[t];
                        }
                        for &k in &negs {
                            let neg = shared2.row_mut(k);
                            let s = sigmoid(dot(&snapshot, neg));
                            for t in 0..dim {
                                e1_row[t] -= lr * s * neg[t];
                                neg[t] -= lr * s * snapshot[t];
                            }
                        }
                    }
                }
            });
        }
    });

    let e1 = EmbeddingMatrix::from_values(filtered.left_vocab, dim, shared1.values.into_inner())?;
    let e2 = EmbeddingMatrix::from_values(filtered.right_vocab, dim, shared2.values.into_inner())?;
    Ok((e1, e2))
}

/// Emits (token_t, token_{t+d}) for 0 < |d| <= window within each sequence,
/// after removing tokens whose corpus count falls below `min_count`.
pub fn skipgram_pairs(
    sequences: &[Vec<String>],
    window: usize,
    min_count: usize,
) -> Result<PairStream> {
    if window < 1 {
        return Err(Error::InvalidParameter("window must be >= 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for seq in sequences {
        for tok in seq {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut vocab = EntityVocab::new();
    let filtered: Vec<Vec<usize>> = sequences
        .iter()
        .map(|seq| {
            seq.iter()
                .filter(|tok| counts[tok.as_str()] >= min_count)
                .map(|tok| vocab.intern(tok))
                .collect()
        })
        .collect();

    let mut pairs = Vec::new();
    for seq in &filtered {
        for (t, &center) in seq.iter().enumerate() {
            let lo = t.saturating_sub(window);
            let hi = (t + window).min(seq.len().saturating_sub(1));
            for (ctx_pos, &context) in seq.iter().enumerate().take(hi + 1).skip(lo) {
                if ctx_pos != t {
                    pairs.push((center, context, 1.0));
                }
            }
        }
    }
    Ok(PairStream {
        pairs,
        left_vocab: vocab.clone(),
        right_vocab: vocab,
    })
}

/// Single pass merging adjacent token bigrams whose corpus count reaches
/// `threshold` into `a_b` tokens, left to right.
pub fn merge_phrases(sequences: &[Vec<String>], threshold: usize) -> Vec<Vec<String>> {
    let mut bigram_counts: HashMap<(&str, &str), usize> = HashMap::new();
    for seq in sequences {
        for pair in seq.windows(2) {
            *bigram_counts
                .entry((pair[0].as_str(), pair[1].as_str()))
                .or_default() += 1;
        }
    }
    sequences
        .iter()
        .map(|seq| {
            let mut out = Vec::with_capacity(seq.len());
            let mut t = 0;
            while t < seq.len() {
                if t + 1 < seq.len()
                    && bigram_counts[&(seq[t].as_str(), seq[t + 1].as_str())] >= threshold
                {
                    out.push(format!("{}_{}", seq[t], seq[t + 1]));
                    t += 2;
                } else {
                    out.push(seq[t].clone());
                    t += 1;
                }
            }
            out
        })
        .collect()
}

/// What to do when a bag-of-features key is missing from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownKeyPolicy {
    #[default]
    Fail,
    Skip,
}

/// Weighted average of feature embeddings: sum w_f E(f) / sum w_f.
pub fn bag_of_features_embed(
    features: &EmbeddingMatrix,
    bag: &[(String, f64)],
    policy: UnknownKeyPolicy,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; features.dim()];
    let mut total = 0.0;
    let mut used = 0usize;
    for (key, weight) in bag {
        match features.lookup(key) {
            Some(row) => {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += weight * v;
                }
                total += weight;
                used += 1;
            }
            None if policy == UnknownKeyPolicy::Fail => {
                return Err(Error::UnknownKey(key.clone()));
            }
            None => {}
        }
    }
    if used == 0 {
        return Err(Error::EmptyInput("no known features in bag".into()));
    }
    if total <= 0.0 {
        return Err(Error::InvalidParameter(
            "feature weights must sum to a positive value".into(),
        ));
    }
    for a in acc.iter_mut() {
        *a /= total;
    }
    Ok(acc)
}
