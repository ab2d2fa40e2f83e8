use std::collections::HashMap;

/// An ordered entity vocabulary mapping opaque string keys to dense indices.
///
/// Keys are assigned indices in insertion order, so building a vocab from the
/// same input order always produces the same mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityVocab {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl EntityVocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            entries: Vec::with_capacity(n),
            index: HashMap::with_capacity(n),
        }
    }

    /// Builds a vocab from keys in first-seen order; duplicates are ignored.
    pub fn from_keys<I, S>(keys: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::new();
        for key in keys {
            vocab.intern(key.as_ref());
        }
        vocab
    }

    /// Returns the index for `key`, inserting it at the end if absent.
    pub fn intern(&mut self, key: &str) -> usize {
        if let Some(&i) = self.index.get(key) {
            return i;
        }
        let i = self.entries.len();
        self.entries.push(key.to_owned());
        self.index.insert(key.to_owned(), i);
        i
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn key(&self, index: usize) -> Option<&str> {
        self.entries.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }
}
