use crate::error::{Error, Result};
use crate::vocab::EntityVocab;

/// A weighted bipartite interaction matrix in coordinate-list form.
///
/// Rows and columns each carry their own vocabulary. Entries are kept sorted
/// by (row, col) and unique after [`consolidate`]; weights are finite and
/// non-negative. The struct is immutable after construction; the pruning and
/// normalization operations return new matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInteractionMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
    row_vocab: EntityVocab,
    col_vocab: EntityVocab,
}

/// Row-compressed view of a [`SparseInteractionMatrix`], built on demand for
/// traversal-heavy consumers (factorization, fold-in).
#[derive(Debug, Clone)]
pub struct CsrView {
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl CsrView {
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }
}

/// Sums duplicate (row, col) pairs and builds vocabularies in first-seen
/// order. Rejects negative or non-finite weights, identifying the offending
/// record.
pub fn consolidate<R, C>(interactions: &[(R, C, f64)]) -> Result<SparseInteractionMatrix>
where
    R: AsRef<str>,
    C: AsRef<str>,
{
    let mut row_vocab = EntityVocab::new();
    let mut col_vocab = EntityVocab::new();
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(interactions.len());
    for (index, (row, col, weight)) in interactions.iter().enumerate() {
        let w = *weight;
        if !w.is_finite() || w < 0.0 {
            return Err(Error::BadWeight {
                index,
                row: row.as_ref().to_owned(),
                col: col.as_ref().to_owned(),
                weight: w,
            });
        }
        let r = row_vocab.intern(row.as_ref());
        let c = col_vocab.intern(col.as_ref());
        entries.push((r, c, w));
    }
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    for (r, c, w) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += w,
            _ => merged.push((r, c, w)),
        }
    }
    Ok(SparseInteractionMatrix {
        n_rows: row_vocab.len(),
        n_cols: col_vocab.len(),
        entries: merged,
        row_vocab,
        col_vocab,
    })
}

impl SparseInteractionMatrix {
    /// Builds a matrix from already-indexed entries. Entries are consolidated
    /// (sorted, duplicates summed) and validated against the vocab sizes.
    pub fn from_indexed(
        row_vocab: EntityVocab,
        col_vocab: EntityVocab,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let (n_rows, n_cols) = (row_vocab.len(), col_vocab.len());
        for &(r, c, w) in &entries {
            if r >= n_rows {
                return Err(Error::IndexOutOfBounds { index: r, size: n_rows });
            }
            if c >= n_cols {
                return Err(Error::IndexOutOfBounds { index: c, size: n_cols });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::BadWeight {
                    index: 0,
                    row: row_vocab.key(r).unwrap_or("?").to_owned(),
                    col: col_vocab.key(c).unwrap_or("?").to_owned(),
                    weight: w,
                });
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += w,
                _ => merged.push((r, c, w)),
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries: merged,
            row_vocab,
            col_vocab,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn row_vocab(&self) -> &EntityVocab {
        &self.row_vocab
    }

    pub fn col_vocab(&self) -> &EntityVocab {
        &self.col_vocab
    }

    /// Weight stored for a (row key, col key) pair; 0 for absent pairs.
    pub fn weight(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.row_vocab.get(row)?;
        let c = self.col_vocab.get(col)?;
        let w = self
            .entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(r, c)))
            .map(|i| self.entries[i].2)
            .unwrap_or(0.0);
        Some(w)
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_rows];
        for &(r, _, w) in &self.entries {
            sums[r] += w;
        }
        sums
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for &(_, c, w) in &self.entries {
            sums[c] += w;
        }
        sums
    }

    pub fn to_csr(&self) -> CsrView {
        let mut indptr = vec![0usize; self.n_rows + 1];
        for &(r, _, _) in &self.entries {
            indptr[r + 1] += 1;
        }
        for i in 0..self.n_rows {
            indptr[i + 1] += indptr[i];
        }
        // entries are sorted by (row, col), so a single pass fills CSR order
        let indices = self.entries.iter().map(|e| e.1).collect();
        let values = self.entries.iter().map(|e| e.2).collect();
        CsrView {
            indptr,
            indices,
            values,
            n_rows: self.n_rows,
            n_cols: self.n_cols,
        }
    }

    /// Keeps the `n` rows with the highest total weight (ties broken by lower
    /// index) and reindexes the row vocab. `n >= n_rows` is the identity.
    pub fn prune_top_rows(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("prune_top_rows requires n >= 1".into()));
        }
        if n >= self.n_rows {
            return Ok(self.clone());
        }
        let keep = top_indices(&self.row_sums(), n);
        Ok(self.select_rows(&keep))
    }

    /// Column counterpart of [`prune_top_rows`].
    pub fn prune_top_cols(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("prune_top_cols requires n >= 1".into()));
        }
        if n >= self.n_cols {
            return Ok(self.clone());
        }
        let keep = top_indices(&self.col_sums(), n);
        Ok(self.select_cols(&keep))
    }

    /// Removes the `n` columns with the highest total weight and reindexes.
    /// `n >= n_cols` leaves a matrix with no columns.
    pub fn drop_top_cols(&self, n: usize) -> Self {
        if n == 0 {
            return self.clone();
        }
        if n >= self.n_cols {
            return self.select_cols(&[]);
        }
        let dropped = top_indices(&self.col_sums(), n);
        let mut is_dropped = vec![false; self.n_cols];
        for &c in &dropped {
            is_dropped[c] = true;
        }
        let keep: Vec<usize> = (0..self.n_cols).filter(|&c| !is_dropped[c]).collect();
        self.select_cols(&keep)
    }

    /// Normalizes each nonzero entry by the square roots of its raw row and
    /// column sums: x[i,j] = x_raw[i,j] / (sqrt(row_sum_i) * sqrt(col_sum_j)).
    pub fn normalize(&self) -> Self {
        let row_sums = self.row_sums();
        let col_sums = self.col_sums();
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, w)| {
                let scaled = if w == 0.0 {
                    0.0
                } else {
                    w / (row_sums[r].sqrt() * col_sums[c].sqrt())
                };
                (r, c, scaled)
            })
            .collect();
        Self {
            entries,
            row_vocab: self.row_vocab.clone(),
            col_vocab: self.col_vocab.clone(),
            ..*self
        }
    }

    /// Transpose: swaps rows and columns (and their vocabs).
    pub fn transpose(&self) -> Self {
        let mut entries: Vec<(usize, usize, f64)> =
            self.entries.iter().map(|&(r, c, w)| (c, r, w)).collect();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            entries,
            row_vocab: self.col_vocab.clone(),
            col_vocab: self.row_vocab.clone(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for &(r, c, w) in &self.entries {
            dense[r][c] = w;
        }
        dense
    }

    fn select_rows(&self, keep: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.n_rows];
        let mut row_vocab = EntityVocab::with_capacity(keep.len());
        for &old in keep {
            remap[old] = row_vocab.intern(self.row_vocab.key(old).unwrap());
        }
        let entries = self
            .entries
            .iter()
            .filter(|&&(r, _, _)| remap[r] != usize::MAX)
            .map(|&(r, c, w)| (remap[r], c, w))
            .collect();
        Self {
            n_rows: row_vocab.len(),
            n_cols: self.n_cols,
            entries,
            row_vocab,
            col_vocab: self.col_vocab.clone(),
        }
    }

    fn select_cols(&self, keep: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.n_cols];
        let mut col_vocab = EntityVocab::with_capacity(keep.len());
        for &old in keep {
            remap[old] = col_vocab.intern(self.col_vocab.key(old).unwrap());
        }
        let entries = self
            .entries
            .iter()
            .filter(|&&(_, c, _)| remap[c] != usize::MAX)
            .map(|&(r, c, w)| (r, remap[c], w))
            .collect();
        Self {
            n_rows: self.n_rows,
            n_cols: col_vocab.len(),
            entries,
            row_vocab: self.row_vocab.clone(),
            col_vocab,
        }
    }
}

/// Indices of the top-`n` sums, descending by sum with ties broken by lower
/// index; the result is sorted ascending so survivors keep their original
/// relative order.
fn top_indices(sums: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&a, &b| {
        sums[b]
            .partial_cmp(&sums[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut keep: Vec<usize> = order.into_iter().take(n).collect();
    keep.sort_unstable();
    keep
}
