use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::text::{char_ngrams, normalize_chars, tokenize, word_ngrams, NgramRange};
use super::{FeatureError, SparseVector};
use crate::scalar::Scalar;

/// Id 0 pads sequences and is skipped by the recurrent model.
pub const PAD_ID: usize = 0;
/// Id 1 stands in for every out-of-vocabulary token.
pub const UNKNOWN_ID: usize = 1;
const RESERVED_IDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabMode {
    WordNgram,
    CharNgram,
    Combined,
    Sequence,
}

impl VocabMode {
    pub fn is_sparse(self) -> bool {
        self != VocabMode::Sequence
    }
}

/// Ranked ngram entries of one kind, with their reverse lookup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct NgramTable {
    orders: NgramRange,
    entries: Vec<String>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct RawTable {
    orders: NgramRange,
    entries: Vec<String>,
}

impl TryFrom<RawTable> for NgramTable {
    type Error = FeatureError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        NgramTable::new(raw.orders, raw.entries)
    }
}

impl PartialEq for NgramTable {
    fn eq(&self, other: &Self) -> bool {
        self.orders == other.orders && self.entries == other.entries
    }
}

impl NgramTable {
    pub fn new(orders: NgramRange, entries: Vec<String>) -> Result<Self, FeatureError> {
        let mut lookup = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if lookup.insert(e.clone(), i).is_some() {
                return Err(FeatureError::Vocabulary(format!("duplicate entry `{e}`")));
            }
        }
        Ok(Self { orders, entries, lookup })
    }

    pub fn orders(&self) -> &NgramRange {
        &self.orders
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index(&self, gram: &str) -> Option<usize> {
        self.lookup.get(gram).copied()
    }

    /// Keeps units seen at least `min_count` times, ranked by frequency
    /// (descending) then lexicographically, and truncates to `max_size`.
    fn ranked(orders: NgramRange, counts: HashMap<String, usize>, min_count: usize, max_size: usize) -> Self {
        let mut kept: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| a.cmp(b)));
        kept.truncate(max_size);
        let entries = kept.into_iter().map(|(g, _)| g).collect();
        Self::new(orders, entries).expect("counted keys are unique")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabConfig {
    #[serde(default = "default_word_orders")]
    pub word_ngrams: NgramRange,
    #[serde(default = "default_char_orders")]
    pub char_ngrams: NgramRange,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    #[serde(default = "default_max_word")]
    pub max_word: usize,
    #[serde(default = "default_max_char")]
    pub max_char: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
}

fn default_word_orders() -> NgramRange {
    NgramRange::span(1, 2).unwrap()
}
fn default_char_orders() -> NgramRange {
    NgramRange::span(3, 5).unwrap()
}
fn default_min_count() -> usize {
    2
}
fn default_max_word() -> usize {
    20_000
}
fn default_max_char() -> usize {
    50_000
}
fn default_max_tokens() -> usize {
    10_000
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            word_ngrams: default_word_orders(),
            char_ngrams: default_char_orders(),
            min_count: default_min_count(),
            max_word: default_max_word(),
            max_char: default_max_char(),
            max_tokens: default_max_tokens(),
        }
    }
}

/// Ngram/token dictionary. LR modes index features from 0; combined mode
/// places char ngrams after the word ngrams. Sequence mode reserves ids 0
/// (padding) and 1 (unknown), real tokens start at 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVocabulary")]
pub struct Vocabulary {
    mode: VocabMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    word: Option<NgramTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chars: Option<NgramTable>,
}

#[derive(Deserialize)]
struct RawVocabulary {
    mode: VocabMode,
    word: Option<NgramTable>,
    chars: Option<NgramTable>,
}

impl TryFrom<RawVocabulary> for Vocabulary {
    type Error = FeatureError;

    fn try_from(raw: RawVocabulary) -> Result<Self, Self::Error> {
        Vocabulary::from_tables(raw.mode, raw.word, raw.chars)
    }
}

impl Vocabulary {
    pub fn from_tables(
        mode: VocabMode,
        word: Option<NgramTable>,
        chars: Option<NgramTable>,
    ) -> Result<Self, FeatureError> {
        let ok = match mode {
            VocabMode::WordNgram => word.is_some() && chars.is_none(),
            VocabMode::CharNgram => word.is_none() && chars.is_some(),
            VocabMode::Combined => word.is_some() && chars.is_some(),
            VocabMode::Sequence => chars.is_none() && word.as_ref().is_some_and(|w| w.orders.orders() == [1]),
        };
        if !ok {
            return Err(FeatureError::Vocabulary(format!("tables do not match mode {mode:?}")));
        }
        Ok(Self { mode, word, chars })
    }

    /// Sequence vocabulary over the given tokens, assigned ids 2, 3, ...
    pub fn sequence<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self, FeatureError> {
        let table = NgramTable::new(NgramRange::new(vec![1]).unwrap(), tokens.into_iter().map(Into::into).collect())?;
        Self::from_tables(VocabMode::Sequence, Some(table), None)
    }

    pub fn mode(&self) -> VocabMode {
        self.mode
    }

    pub fn word_table(&self) -> Option<&NgramTable> {
        self.word.as_ref()
    }

    pub fn char_table(&self) -> Option<&NgramTable> {
        self.chars.as_ref()
    }

    /// Size of the index space: feature count for LR modes, embedding rows
    /// (reserved ids included) for sequence mode.
    pub fn size(&self) -> usize {
        let tables = self.word.as_ref().map_or(0, NgramTable::len) + self.chars.as_ref().map_or(0, NgramTable::len);
        match self.mode {
            VocabMode::Sequence => tables + RESERVED_IDS,
            _ => tables,
        }
    }

    /// Id of a token in sequence mode.
    pub fn token_id(&self, token: &str) -> usize {
        self.word.as_ref().and_then(|w| w.index(token)).map_or(UNKNOWN_ID, |i| i + RESERVED_IDS)
    }

    fn word_offset(&self) -> usize {
        self.word.as_ref().map_or(0, NgramTable::len)
    }
}

/// Builds a vocabulary of the given mode from training texts.
pub fn build_vocabulary<'a, I>(texts: I, mode: VocabMode, config: &VocabConfig) -> Result<Vocabulary, FeatureError>
where
    I: IntoIterator<Item = &'a str>,
{
    let texts: Vec<&str> = texts.into_iter().collect();
    if texts.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let count_words = |orders: &NgramRange| {
        let mut counts = HashMap::new();
        for t in &texts {
            for g in word_ngrams(&tokenize(t), orders) {
                *counts.entry(g).or_insert(0) += 1;
            }
        }
        counts
    };
    let count_chars = |orders: &NgramRange| {
        let mut counts = HashMap::new();
        for t in &texts {
            for g in char_ngrams(&normalize_chars(t), orders) {
                *counts.entry(g).or_insert(0) += 1;
            }
        }
        counts
    };
    let word_table =
        |orders: &NgramRange, max| NgramTable::ranked(orders.clone(), count_words(orders), config.min_count, max);
    let char_table = || {
        let orders = &config.char_ngrams;
        NgramTable::ranked(orders.clone(), count_chars(orders), config.min_count, config.max_char)
    };
    let (word, chars) = match mode {
        VocabMode::WordNgram => (Some(word_table(&config.word_ngrams, config.max_word)), None),
        VocabMode::CharNgram => (None, Some(char_table())),
        VocabMode::Combined => (Some(word_table(&config.word_ngrams, config.max_word)), Some(char_table())),
        VocabMode::Sequence => (Some(word_table(&NgramRange::new(vec![1]).unwrap(), config.max_tokens)), None),
    };
    Vocabulary::from_tables(mode, word, chars)
}

/// L2-normalized ngram counts of `text`; out-of-vocabulary ngrams drop out.
pub fn vectorize<T: Scalar>(text: &str, vocab: &Vocabulary) -> Result<SparseVector<T>, FeatureError> {
    if !vocab.mode.is_sparse() {
        return Err(FeatureError::WrongMode { expected: "an ngram mode", found: vocab.mode });
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    if let Some(word) = &vocab.word {
        for g in word_ngrams(&tokenize(text), &word.orders) {
            if let Some(i) = word.index(&g) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
    }
    if let Some(chars) = &vocab.chars {
        let offset = vocab.word_offset();
        for g in char_ngrams(&normalize_chars(text), &chars.orders) {
            if let Some(i) = chars.index(&g) {
                *counts.entry(i + offset).or_insert(0) += 1;
            }
        }
    }
    let norm = counts.values().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    let (indices, values) = counts.into_iter().map(|(i, c)| (i, T::lit(c as f64 / norm))).unzip();
    Ok(SparseVector::from_parts(indices, values))
}

/// Token ids of the first `max_len` word tokens (unknown tokens map to 1).
pub fn encode_sequence(text: &str, vocab: &Vocabulary, max_len: usize) -> Result<Vec<usize>, FeatureError> {
    if vocab.mode != VocabMode::Sequence {
        return Err(FeatureError::WrongMode { expected: "sequence", found: vocab.mode });
    }
    if max_len == 0 {
        return Err(FeatureError::MaxLen);
    }
    Ok(tokenize(text).iter().take(max_len).map(|t| vocab.token_id(t)).collect())
}
