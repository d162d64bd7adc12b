//! Text featurization: tokenization, word/char ngrams, vocabularies, sparse
//! L2-normalized count vectors for the linear models and token-id sequences
//! for the recurrent model.

mod text;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use text::{char_ngrams, extract_ngrams, normalize_chars, tokenize, word_ngrams, NgramMode, NgramRange};
pub use vocab::{
    build_vocabulary, encode_sequence, vectorize, NgramTable, VocabConfig, VocabMode, Vocabulary, PAD_ID, UNKNOWN_ID,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid ngram range: {0}")]
    NgramRange(String),
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("vocabulary mode {found:?} used where {expected} is required")]
    WrongMode { expected: &'static str, found: VocabMode },
    #[error("max_len must be at least 1")]
    MaxLen,
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector<T> {
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseVector<T> {
    /// Panics unless `indices` is strictly increasing and matches `values`
    /// in length.
    pub fn from_parts(indices: Vec<usize>, values: Vec<T>) -> Self {
        assert_eq!(indices.len(), values.len(), "indices/values length mismatch");
        assert!(indices.windows(2).all(|w| w[0] < w[1]), "indices must be strictly increasing");
        Self { indices, values }
    }

    /// Vector from (index, value) pairs in any order; duplicate indices add.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, T)>) -> Self {
        let mut acc = std::collections::BTreeMap::new();
        for (i, v) in pairs {
            *acc.entry(i).or_insert_with(T::zero) += v;
        }
        let (indices, values) = acc.into_iter().unzip();
        Self { indices, values }
    }

    pub fn empty() -> Self {
        Self { indices: Vec::new(), values: Vec::new() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    /// Dot product with a dense vector; caller guarantees index bounds.
    pub fn dot(&self, dense: &[T]) -> T {
        self.iter().map(|(i, v)| dense[i] * v).sum()
    }
}
