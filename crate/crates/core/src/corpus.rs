//! Labeled review corpora: JSON Lines ingestion, coder adjudication,
//! inter-coder agreement and stratified splitting.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("duplicate review id `{id}` (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("review `{id}` has {count} coder label(s); adjudication needs 2 or 3")]
    CoderCount { id: String, count: usize },
    #[error("label lists differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("agreement needs at least one labeled item")]
    Empty,
    #[error("review `{0}` has no resolved label")]
    Unresolved(String),
    #[error("invalid split ratios: {0}")]
    Ratios(String),
    #[error("corpus has no `{0}` reviews; stratification needs both classes")]
    MissingClass(Label),
}

/// Binary review class. `Unfair` is the positive class everywhere: the
/// review blames the worker for something outside their control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fair,
    Unfair,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Fair, Label::Unfair];

    pub fn is_unfair(self) -> bool {
        self == Label::Unfair
    }

    /// 1 for unfair, 0 for fair.
    pub fn target<T: Scalar>(self) -> T {
        if self.is_unfair() {
            T::one()
        } else {
            T::zero()
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fair => "fair",
            Label::Unfair => "unfair",
        }
    }

    fn parse(s: &str) -> Option<Label> {
        match s {
            "fair" => Some(Label::Fair),
            "unfair" => Some(Label::Unfair),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledReview {
    pub id: String,
    pub market: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coders: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl LabeledReview {
    /// A review carrying an already resolved label and no coder history.
    pub fn labeled(id: impl Into<String>, market: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Self { id: id.into(), market: market.into(), text: text.into(), coders: Vec::new(), label: Some(label) }
    }

    fn resolved_label(&self) -> Result<Label, CorpusError> {
        self.label.ok_or_else(|| CorpusError::Unresolved(self.id.clone()))
    }
}

// Everything optional so that a missing field is reported by name.
#[derive(Deserialize)]
struct RawReview {
    id: Option<String>,
    market: Option<String>,
    text: Option<String>,
    #[serde(default)]
    coders: Option<Vec<String>>,
    #[serde(default)]
    label: Option<String>,
}

/// Parses a JSON Lines corpus. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<LabeledReview>, CorpusError> {
    let path = path.as_ref();
    let body =
        fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_corpus(&body)
}

pub fn parse_corpus(body: &str) -> Result<Vec<LabeledReview>, CorpusError> {
    let mut reviews = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw_line) in body.lines().enumerate() {
        let line = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let raw: RawReview =
            serde_json::from_str(raw_line).map_err(|e| CorpusError::Malformed { line, message: e.to_string() })?;
        let review = validate_raw(raw, line)?;
        if !seen.insert(review.id.clone()) {
            return Err(CorpusError::DuplicateId { id: review.id, line });
        }
        reviews.push(review);
    }
    Ok(reviews)
}

fn validate_raw(raw: RawReview, line: usize) -> Result<LabeledReview, CorpusError> {
    let invalid = |message: String| CorpusError::Invalid { line, message };
    let id = raw.id.ok_or(CorpusError::MissingField { line, field: "id" })?;
    let market = raw.market.ok_or(CorpusError::MissingField { line, field: "market" })?;
    let text = raw.text.ok_or(CorpusError::MissingField { line, field: "text" })?;
    if id.is_empty() {
        return Err(invalid("`id` is empty".into()));
    }
    if market.is_empty() {
        return Err(invalid("`market` is empty".into()));
    }
    if text.trim().is_empty() {
        return Err(invalid("`text` is empty".into()));
    }
    let coders = raw
        .coders
        .unwrap_or_default()
        .iter()
        .map(|c| Label::parse(c).ok_or_else(|| invalid(format!("coder label `{c}` is not fair/unfair"))))
        .collect::<Result<Vec<_>, _>>()?;
    if !matches!(coders.len(), 0 | 2 | 3) {
        return Err(invalid(format!("expected 0, 2 or 3 coder labels, found {}", coders.len())));
    }
    let label = match raw.label {
        Some(l) => Some(Label::parse(&l).ok_or_else(|| invalid(format!("label `{l}` is not fair/unfair")))?),
        None => None,
    };
    if coders.is_empty() && label.is_none() {
        return Err(CorpusError::MissingField { line, field: "label" });
    }
    if coders.len() == 2 && coders[0] != coders[1] && label.is_some() {
        return Err(invalid("label given for an unresolved two-coder disagreement".into()));
    }
    Ok(LabeledReview { id, market, text, coders, label })
}

pub fn write_corpus(path: impl AsRef<Path>, reviews: &[LabeledReview]) -> std::io::Result<()> {
    let mut out = String::new();
    for review in reviews {
        out.push_str(&serde_json::to_string(review).expect("review serializes"));
        out.push('\n');
    }
    fs::write(path, out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjudication {
    pub resolved: Vec<LabeledReview>,
    pub needs_tiebreak: Vec<LabeledReview>,
}

/// Resolves coder labels: agreement of the first two coders wins, otherwise
/// the third coder breaks the tie. Two-coder disagreements are returned
/// separately.
pub fn resolve_labels(reviews: Vec<LabeledReview>) -> Result<Adjudication, CorpusError> {
    let mut out = Adjudication::default();
    for mut review in reviews {
        let label = match review.coders.as_slice() {
            [a, b] | [a, b, _] if a == b => Some(*a),
            [_, _, third] => Some(*third),
            [_, _] => None,
            other => return Err(CorpusError::CoderCount { id: review.id, count: other.len() }),
        };
        review.label = label;
        if label.is_some() {
            out.resolved.push(review);
        } else {
            out.needs_tiebreak.push(review);
        }
    }
    Ok(out)
}

/// Like [`resolve_labels`] but passes through reviews that arrive with a
/// label and no coder history.
pub fn adjudicate(reviews: Vec<LabeledReview>) -> Result<Adjudication, CorpusError> {
    let order: Vec<String> = reviews.iter().map(|r| r.id.clone()).collect();
    let (coded, prelabeled): (Vec<_>, Vec<_>) = reviews.into_iter().partition(|r| !r.coders.is_empty());
    let mut out = resolve_labels(coded)?;
    out.resolved.extend(prelabeled);
    // keep file order
    let rank: std::collections::HashMap<&str, usize> =
        order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    out.resolved.sort_by_key(|r| rank[r.id.as_str()]);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats<T> {
    pub observed_agreement: T,
    pub expected_agreement: T,
    pub kappa: T,
}

/// Cohen's kappa between two coders. When both coders agree everywhere the
/// kappa is 1, including the degenerate case where chance agreement is 1.
pub fn cohen_kappa<T: Scalar>(a: &[Label], b: &[Label]) -> Result<AgreementStats<T>, CorpusError> {
    if a.len() != b.len() {
        return Err(CorpusError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(CorpusError::Empty);
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let marginal_product: u128 = Label::ALL
        .iter()
        .map(|c| {
            let ca = a.iter().filter(|l| *l == c).count() as u128;
            let cb = b.iter().filter(|l| *l == c).count() as u128;
            ca * cb
        })
        .sum();
    let ratio = |num: u128, den: u128| T::lit(num as f64) / T::lit(den as f64);
    let observed = ratio(agree, n);
    let expected = ratio(marginal_product, n * n);
    // integer numerator/denominator keeps kappa exactly symmetric
    let kappa = if agree == n {
        T::one()
    } else {
        let num = agree as f64 * n as f64 - marginal_product as f64;
        let den = (n * n - marginal_product) as f64;
        T::lit(num / den)
    };
    Ok(AgreementStats { observed_agreement: observed, expected_agreement: expected, kappa })
}

/// Fractions of the (train, test, validation) partitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, test: 0.1, validation: 0.1 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, test: f64, validation: f64) -> Result<Self, CorpusError> {
        let r = Self { train, test, validation };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let parts = [self.train, self.test, self.validation];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(CorpusError::Ratios(format!("each ratio must lie in [0, 1], got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Ratios(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` items: every quota lands within
    /// one item of its exact share and the three always sum to `n`.
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let exact = [self.train, self.test, self.validation].map(|r| r * n as f64);
        // tolerate representation error such as 0.1 * 30 = 3.0000000000000004
        let mut counts = exact.map(|q| (q + 1e-9).floor() as usize);
        let mut leftover = n - counts.iter().sum::<usize>().min(n);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| {
            let fi = exact[i] - counts[i] as f64;
            let fj = exact[j] - counts[j] as f64;
            fj.partial_cmp(&fi).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
        });
        for &i in order.iter().cycle() {
            if leftover == 0 {
                break;
            }
            counts[i] += 1;
            leftover -= 1;
        }
        counts
    }

    /// Quotas for several classes at once. Each class gets the floor of its
    /// exact share per partition plus one extra item in as many partitions
    /// as its remainder requires, so every quota stays within one of its
    /// exact share. Extras are placed so that partition totals also land on
    /// the floor or ceiling of their exact share; such a placement always
    /// exists because the exact fractional table is itself feasible. Among
    /// valid placements the one closest to the exact totals wins, then the
    /// one using the largest per-class remainders.
    pub fn apportion_classes(&self, sizes: &[usize]) -> Vec<[usize; 3]> {
        let shares = [self.train, self.test, self.validation];
        let exact: Vec<[f64; 3]> = sizes.iter().map(|&n| shares.map(|r| r * n as f64)).collect();
        let floors: Vec<[usize; 3]> = exact.iter().map(|e| e.map(|q| (q + 1e-9).floor() as usize)).collect();
        let column_exact: [f64; 3] = std::array::from_fn(|j| exact.iter().map(|e| e[j]).sum());
        // per class: which partitions may take an extra item, and how many extras
        let options: Vec<Vec<[bool; 3]>> = sizes
            .iter()
            .zip(&floors)
            .zip(&exact)
            .map(|((&n, f), e)| {
                let extra = n - f.iter().sum::<usize>().min(n);
                (0u8..8)
                    .map(|mask| std::array::from_fn(|j| mask & (1 << j) != 0))
                    .filter(|pick: &[bool; 3]| {
                        pick.iter().filter(|&&b| b).count() == extra
                            && (0..3).all(|j| !pick[j] || e[j] - f[j] as f64 > 1e-9)
                    })
                    .collect()
            })
            .collect();
        let mut best: Option<(f64, f64, Vec<[usize; 3]>)> = None;
        let mut choice = vec![0usize; sizes.len()];
        loop {
            let counts: Vec<[usize; 3]> = floors
                .iter()
                .zip(&choice)
                .zip(&options)
                .map(|((f, &c), opts)| std::array::from_fn(|j| f[j] + usize::from(opts[c][j])))
                .collect();
            let totals: [f64; 3] = std::array::from_fn(|j| counts.iter().map(|c| c[j]).sum::<usize>() as f64);
            let valid =
                (0..3).all(|j| (totals[j] - column_exact[j]).abs() < 1.0 - 1e-9 || totals[j] == column_exact[j]);
            if valid {
                let deviation: f64 = (0..3).map(|j| (totals[j] - column_exact[j]).powi(2)).sum();
                let remainder_used: f64 = counts
                    .iter()
                    .zip(&floors)
                    .zip(&exact)
                    .map(|((c, f), e)| (0..3).filter(|&j| c[j] > f[j]).map(|j| e[j] - f[j] as f64).sum::<f64>())
                    .sum();
                let better = match &best {
                    None => true,
                    Some((d, r, _)) => {
                        deviation < d - 1e-12 || ((deviation - d).abs() <= 1e-12 && remainder_used > r + 1e-12)
                    }
                };
                if better {
                    best = Some((deviation, remainder_used, counts));
                }
            }
            // odometer over every class's options
            let mut k = 0;
            while k < choice.len() {
                choice[k] += 1;
                if choice[k] < options[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == choice.len() {
                break;
            }
        }
        best.map(|(_, _, c)| c).unwrap_or_else(|| sizes.iter().map(|&n| self.apportion(n)).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCorpus {
    pub train: Vec<LabeledReview>,
    pub test: Vec<LabeledReview>,
    pub validation: Vec<LabeledReview>,
}

impl SplitCorpus {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Stratified split: each class is shuffled with a seeded PRNG and
/// apportioned independently. Partitions keep the input order.
pub fn stratified_split(reviews: &[LabeledReview], ratios: SplitRatios, seed: u64) -> Result<SplitCorpus, CorpusError> {
    ratios.validate()?;
    let labels = reviews.iter().map(LabeledReview::resolved_label).collect::<Result<Vec<_>, _>>()?;
    // partition index per review: 0 train, 1 test, 2 validation
    let mut assignment = vec![0u8; reviews.len()];
    let mut classes = Vec::new();
    for class in Label::ALL {
        let members: Vec<usize> = (0..reviews.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            return Err(CorpusError::MissingClass(class));
        }
        classes.push((class, members));
    }
    let sizes: Vec<usize> = classes.iter().map(|(_, m)| m.len()).collect();
    let quotas = ratios.apportion_classes(&sizes);
    for ((class, mut members), [train, test, _]) in classes.into_iter().zip(quotas) {
        let mut rng = seed::rng(seed::derive(seed, &[class.as_str()]));
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = if pos < train {
                0
            } else if pos < train + test {
                1
            } else {
                2
            };
        }
    }
    let mut split = SplitCorpus::default();
    for (review, part) in reviews.iter().zip(assignment) {
        match part {
            0 => split.train.push(review.clone()),
            1 => split.test.push(review.clone()),
            _ => split.validation.push(review.clone()),
        }
    }
    Ok(split)
}

/// Counts of (fair, unfair) reviews carrying a resolved label.
pub fn class_counts(reviews: &[LabeledReview]) -> (usize, usize) {
    reviews.iter().fold((0, 0), |(f, u), r| match r.label {
        Some(Label::Fair) => (f + 1, u),
        Some(Label::Unfair) => (f, u + 1),
        None => (f, u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Fair as F, Unfair as U};

    fn coded(id: &str, coders: &[Label]) -> LabeledReview {
        LabeledReview {
            id: id.into(),
            market: "uber".into(),
            text: "text".into(),
            coders: coders.to_vec(),
            label: None,
        }
    }

    #[test]
    fn parses_single_line() {
        let body = r#"{"id":"r1","market":"uber","text":"late due to traffic","coders":["unfair","unfair"]}"#;
        let reviews = parse_corpus(body).unwrap();
        assert_eq!(reviews.len(), 1);
        let adj = resolve_labels(reviews).unwrap();
        assert_eq!(adj.resolved[0].label, Some(U));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_corpus("").unwrap().is_empty());
        assert!(parse_corpus("\n\n").unwrap().is_empty());
    }

    #[test]
    fn missing_text_names_field_and_line() {
        let err = parse_corpus(r#"{"id":"r1","market":"uber","coders":["fair","fair"]}"#).unwrap_err();
        match err {
            CorpusError::MissingField { line, field } => {
                assert_eq!((line, field), (1, "text"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_text(r#"{"id":"r1","market":"uber","coders":["fair","fair"]}"#).contains("line 1"));
    }

    fn err_text(body: &str) -> String {
        parse_corpus(body).unwrap_err().to_string()
    }

    #[test]
    fn rejects_duplicates_and_bad_lines() {
        let dup = "{\"id\":\"a\",\"market\":\"m\",\"text\":\"t\",\"label\":\"fair\"}\n{\"id\":\"a\",\"market\":\"m\",\"text\":\"t\",\"label\":\"fair\"}";
        assert!(matches!(parse_corpus(dup), Err(CorpusError::DuplicateId { line: 2, .. })));
        assert!(matches!(parse_corpus("{nope"), Err(CorpusError::Malformed { line: 1, .. })));
        let one_coder = r#"{"id":"a","market":"m","text":"t","coders":["fair"]}"#;
        assert!(matches!(parse_corpus(one_coder), Err(CorpusError::Invalid { .. })));
        let bad_label = r#"{"id":"a","market":"m","text":"t","label":"meh"}"#;
        assert!(matches!(parse_corpus(bad_label), Err(CorpusError::Invalid { .. })));
        let no_label = r#"{"id":"a","market":"m","text":"t"}"#;
        assert!(matches!(parse_corpus(no_label), Err(CorpusError::MissingField { field: "label", .. })));
    }

    #[test]
    fn tiebreak_rules() {
        let adj = resolve_labels(vec![coded("a", &[U, U]), coded("b", &[U, F, F]), coded("c", &[U, F])]).unwrap();
        assert_eq!(adj.resolved.len(), 2);
        assert_eq!(adj.resolved[0].label, Some(U));
        assert_eq!(adj.resolved[1].label, Some(F));
        assert_eq!(adj.needs_tiebreak.len(), 1);
        assert_eq!(adj.needs_tiebreak[0].id, "c");
        // an agreeing pair is never overruled by the third coder
        let adj = resolve_labels(vec![coded("d", &[F, F, U])]).unwrap();
        assert_eq!(adj.resolved[0].label, Some(F));
    }

    #[test]
    fn resolve_rejects_short_coder_lists() {
        assert!(matches!(resolve_labels(vec![coded("a", &[U])]), Err(CorpusError::CoderCount { count: 1, .. })));
        assert!(matches!(resolve_labels(vec![coded("a", &[])]), Err(CorpusError::CoderCount { count: 0, .. })));
    }

    #[test]
    fn adjudicate_keeps_prelabeled_in_order() {
        let pre = LabeledReview::labeled("p", "uber", "x", F);
        let adj = adjudicate(vec![coded("a", &[U, U]), pre, coded("b", &[F, F])]).unwrap();
        let ids: Vec<_> = adj.resolved.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "p", "b"]);
    }

    /// Brute force: enumerate marginals by class, independent of the
    /// integer formulation in `cohen_kappa`.
    fn kappa_oracle(a: &[Label], b: &[Label]) -> (f64, f64, f64) {
        let n = a.len() as f64;
        let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
        let mut pe = 0.0;
        for c in [F, U] {
            let pa = a.iter().filter(|&&l| l == c).count() as f64 / n;
            let pb = b.iter().filter(|&&l| l == c).count() as f64 / n;
            pe += pa * pb;
        }
        (po, pe, (po - pe) / (1.0 - pe))
    }

    #[test]
    fn kappa_hand_example() {
        let a = [U, U, F, F, U];
        let b = [U, F, F, F, U];
        let (po, pe, k) = kappa_oracle(&a, &b);
        assert!((po - 0.8).abs() < 1e-12 && (pe - 0.48).abs() < 1e-12);
        let stats: AgreementStats<f64> = cohen_kappa(&a, &b).unwrap();
        assert!((stats.observed_agreement - 0.8).abs() < 1e-12);
        assert!((stats.expected_agreement - 0.48).abs() < 1e-12);
        assert!((stats.kappa - k).abs() < 1e-12);
        assert!((stats.kappa - 0.6154).abs() < 1e-4);
    }

    #[test]
    fn kappa_degenerate_and_errors() {
        let s: AgreementStats<f64> = cohen_kappa(&[U, U, U], &[U, U, U]).unwrap();
        assert_eq!((s.observed_agreement, s.expected_agreement, s.kappa), (1.0, 1.0, 1.0));
        assert!(matches!(cohen_kappa::<f64>(&[U], &[U, F]), Err(CorpusError::LengthMismatch { .. })));
        assert!(matches!(cohen_kappa::<f64>(&[], &[]), Err(CorpusError::Empty)));
        let s32: AgreementStats<f32> = cohen_kappa(&[U, F], &[U, F]).unwrap();
        assert_eq!(s32.kappa, 1.0);
    }

    fn balanced(n_fair: usize, n_unfair: usize) -> Vec<LabeledReview> {
        (0..n_fair)
            .map(|i| LabeledReview::labeled(format!("f{i}"), "uber", "t", F))
            .chain((0..n_unfair).map(|i| LabeledReview::labeled(format!("u{i}"), "uber", "t", U)))
            .collect()
    }

    #[test]
    fn split_ten_reviews() {
        let split = stratified_split(&balanced(5, 5), SplitRatios::default(), 1).unwrap();
        assert_eq!(split.train.len(), 8);
        assert_eq!(class_counts(&split.train), (4, 4));
        assert_eq!(split.test.len(), 1);
        assert_eq!(split.validation.len(), 1);
    }

    #[test]
    fn split_is_seeded() {
        let corpus = balanced(37, 61);
        let a = stratified_split(&corpus, SplitRatios::default(), 9).unwrap();
        let b = stratified_split(&corpus, SplitRatios::default(), 9).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&corpus, SplitRatios::default(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_errors() {
        let mut corpus = balanced(3, 3);
        assert!(matches!(
            stratified_split(&corpus, SplitRatios { train: 0.5, test: 0.1, validation: 0.1 }, 0),
            Err(CorpusError::Ratios(_))
        ));
        assert!(matches!(
            stratified_split(&balanced(4, 0), SplitRatios::default(), 0),
            Err(CorpusError::MissingClass(Label::Unfair))
        ));
        corpus[0].label = None;
        assert!(matches!(stratified_split(&corpus, SplitRatios::default(), 0), Err(CorpusError::Unresolved(_))));
    }

    #[test]
    fn apportion_stays_within_one() {
        let r = SplitRatios::default();
        for n in 0..2000 {
            let counts = r.apportion(n);
            assert_eq!(counts.iter().sum::<usize>(), n);
            for (c, ratio) in counts.iter().zip([0.8, 0.1, 0.1]) {
                assert!((*c as f64 - ratio * n as f64).abs() <= 1.0, "n={n} {counts:?}");
            }
        }
        assert_eq!(r.apportion(1000), [800, 100, 100]);
    }

    #[test]
    fn joint_apportion_keeps_rows_and_columns_close() {
        let r = SplitRatios::default();
        for a in 1..80 {
            for b in 1..80 {
                let q = r.apportion_classes(&[a, b]);
                for (row, n) in q.iter().zip([a, b]) {
                    assert_eq!(row.iter().sum::<usize>(), n);
                    for (c, ratio) in row.iter().zip([0.8, 0.1, 0.1]) {
                        assert!((*c as f64 - ratio * n as f64).abs() <= 1.0, "{a},{b}: {q:?}");
                    }
                }
                for (j, ratio) in [0.8, 0.1, 0.1].into_iter().enumerate() {
                    let total = (q[0][j] + q[1][j]) as f64;
                    assert!((total - ratio * (a + b) as f64).abs() < 1.0, "{a},{b}: {q:?}");
                }
            }
        }
        assert_eq!(r.apportion_classes(&[5, 5]).iter().map(|c| c[1]).sum::<usize>(), 1);
    }
}
