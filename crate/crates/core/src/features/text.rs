use serde::{Deserialize, Serialize};

use super::FeatureError;

fn is_dash(c: char) -> bool {
    matches!(
        c,
        '-' | '\u{2010}'..='\u{2015}' | '\u{2212}' | '\u{2E3A}' | '\u{2E3B}' | '\u{FE58}' | '\u{FE63}' | '\u{FF0D}'
    )
}

/// Lowercases, splits on whitespace and dashes, and strips leading and
/// trailing non-alphanumeric characters from every token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || is_dash(c))
        .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercased text with every whitespace run collapsed to a single space.
pub fn normalize_chars(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Sorted set of ngram orders, each at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct NgramRange(Vec<usize>);

impl NgramRange {
    pub fn new(mut orders: Vec<usize>) -> Result<Self, FeatureError> {
        if orders.is_empty() {
            return Err(FeatureError::NgramRange("no ngram orders given".into()));
        }
        if orders.contains(&0) {
            return Err(FeatureError::NgramRange("ngram order 0".into()));
        }
        orders.sort_unstable();
        orders.dedup();
        Ok(Self(orders))
    }

    /// Orders `lo..=hi`.
    pub fn span(lo: usize, hi: usize) -> Result<Self, FeatureError> {
        Self::new((lo..=hi).collect())
    }

    pub fn orders(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for NgramRange {
    type Error = FeatureError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<NgramRange> for Vec<usize> {
    fn from(r: NgramRange) -> Self {
        r.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgramMode {
    Word,
    Char,
}

/// Contiguous word ngrams, grouped by order then position, joined by a space.
pub fn word_ngrams<S: AsRef<str>>(tokens: &[S], range: &NgramRange) -> Vec<String> {
    let mut out = Vec::new();
    for &n in range.orders() {
        if tokens.len() < n {
            continue;
        }
        out.extend(tokens.windows(n).map(|w| w.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")));
    }
    out
}

/// Contiguous character ngrams of already normalized text.
pub fn char_ngrams(normalized: &str, range: &NgramRange) -> Vec<String> {
    let chars: Vec<char> = normalized.chars().collect();
    let mut out = Vec::new();
    for &n in range.orders() {
        if chars.len() < n {
            continue;
        }
        out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
    }
    out
}

/// Ngrams of raw text: tokenized for word mode, normalized for char mode.
pub fn extract_ngrams(text: &str, range: &NgramRange, mode: NgramMode) -> Vec<String> {
    match mode {
        NgramMode::Word => word_ngrams(&tokenize(text), range),
        NgramMode::Char => char_ngrams(&normalize_chars(text), range),
    }
}
