//! Tokenization, stopwords, n-grams and TF-IDF vectorization.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Lowercased word tokens of a text plus the punctuation counts the
/// lexicon metrics need.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedText {
    pub tokens: Vec<String>,
    pub question_marks: usize,
    pub exclamation_marks: usize,
}

impl TokenizedText {
    pub fn total_tokens(&self) -> usize {
        self.tokens.len()
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits text into lowercase tokens.
///
/// Tokens are maximal runs of alphanumeric characters, optionally joined by
/// single internal apostrophes (`don't`). A period between two letters is
/// dropped before splitting so that `R.I.P.` becomes `rip`.
pub fn tokenize(text: &str) -> TokenizedText {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut out = TokenizedText::default();
    let mut current = String::new();

    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        if !current.is_empty() {
            tokens.push(std::mem::take(current));
        }
    };

    for (i, &c) in chars.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        match c {
            '?' => out.question_marks += 1,
            '!' => out.exclamation_marks += 1,
            _ => {}
        }
        if c.is_alphanumeric() {
            current.push(c);
        } else if c == '.'
            && prev.is_some_and(char::is_alphabetic)
            && next.is_some_and(char::is_alphabetic)
        {
            // r.i.p -> rip
        } else if is_apostrophe(c)
            && !current.is_empty()
            && prev.is_some_and(char::is_alphanumeric)
            && next.is_some_and(char::is_alphanumeric)
        {
            current.push('\'');
        } else {
            flush(&mut current, &mut out.tokens);
        }
    }
    flush(&mut current, &mut out.tokens);
    out
}

/// A versioned stopword list, one token per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

impl Stopwords {
    pub fn empty() -> Self {
        Stopwords {
            words: HashSet::new(),
        }
    }

    pub fn parse(content: &str) -> Self {
        let words = content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Stopwords { words }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&content))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn remove_stopwords(tokens: &[String], stopwords: &Stopwords) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stopwords.contains(t))
        .cloned()
        .collect()
}

/// Inclusive range of n-gram orders, within `1..=3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRange {
    pub min: usize,
    pub max: usize,
}

impl NgramRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min < 1 || max > 3 || min > max {
            return Err(Error::invalid(format!(
                "n-gram range {min}..={max} must lie within 1..=3"
            )));
        }
        Ok(NgramRange { min, max })
    }

    pub fn exactly(n: usize) -> Result<Self> {
        Self::new(n, n)
    }
}

impl Default for NgramRange {
    fn default() -> Self {
        NgramRange { min: 1, max: 3 }
    }
}

/// Contiguous n-grams joined by a single space, shortest order first.
pub fn extract_ngrams(tokens: &[String], range: NgramRange) -> Vec<String> {
    let mut out = Vec::new();
    for n in range.min..=range.max {
        if n > tokens.len() {
            break;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Tokenize, drop stopwords, then form n-grams.
pub fn analyze(text: &str, stopwords: &Stopwords, range: NgramRange) -> Vec<String> {
    let tokens = remove_stopwords(&tokenize(text).tokens, stopwords);
    extract_ngrams(&tokens, range)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabConfig {
    pub n_range: NgramRange,
    pub min_df: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            n_range: NgramRange::default(),
            min_df: 2,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VocabularyRecord {
    n_range: NgramRange,
    min_df: usize,
    document_count: usize,
    ngrams: Vec<String>,
    idf: Vec<f64>,
}

/// N-gram index with smoothed inverse document frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "VocabularyRecord", try_from = "VocabularyRecord")]
pub struct Vocabulary {
    ngrams: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
    n_range: NgramRange,
    min_df: usize,
    document_count: usize,
}

impl From<Vocabulary> for VocabularyRecord {
    fn from(v: Vocabulary) -> Self {
        VocabularyRecord {
            n_range: v.n_range,
            min_df: v.min_df,
            document_count: v.document_count,
            ngrams: v.ngrams,
            idf: v.idf,
        }
    }
}

impl TryFrom<VocabularyRecord> for Vocabulary {
    type Error = String;

    fn try_from(r: VocabularyRecord) -> std::result::Result<Self, String> {
        if r.ngrams.len() != r.idf.len() {
            return Err(format!(
                "{} ngrams but {} idf values",
                r.ngrams.len(),
                r.idf.len()
            ));
        }
        let index: HashMap<String, usize> = r
            .ngrams
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != r.ngrams.len() {
            return Err("duplicate ngram in vocabulary".into());
        }
        if r.idf.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err("idf values must be finite and positive".into());
        }
        Ok(Vocabulary {
            ngrams: r.ngrams,
            idf: r.idf,
            index,
            n_range: r.n_range,
            min_df: r.min_df,
            document_count: r.document_count,
        })
    }
}

impl Vocabulary {
    /// Builds the vocabulary from training texts.
    ///
    /// N-grams with document frequency at least `min_df` are indexed in order
    /// of the first document they appear in; n-grams first seen in the same
    /// document are ordered lexicographically. idf(t) = ln((1+N)/(1+df)) + 1.
    pub fn build<'a, I>(texts: I, config: &VocabConfig, stopwords: &Stopwords) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        // ngram -> (first document, df)
        let mut stats: HashMap<String, (usize, usize)> = HashMap::new();
        let mut n_docs = 0;
        for (doc, text) in texts.into_iter().enumerate() {
            n_docs += 1;
            let distinct: HashSet<String> =
                analyze(text, stopwords, config.n_range).into_iter().collect();
            for g in distinct {
                stats.entry(g).or_insert((doc, 0)).1 += 1;
            }
        }
        if n_docs == 0 {
            return Err(Error::invalid("cannot build a vocabulary from zero documents"));
        }

        let mut kept: Vec<(usize, String, usize)> = stats
            .into_iter()
            .filter(|(_, (_, df))| *df >= config.min_df)
            .map(|(g, (first, df))| (first, g, df))
            .collect();
        kept.sort_unstable_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));

        let n = n_docs as f64;
        let mut ngrams = Vec::with_capacity(kept.len());
        let mut idf = Vec::with_capacity(kept.len());
        for (_, g, df) in kept {
            idf.push(((1.0 + n) / (1.0 + df as f64)).ln() + 1.0);
            ngrams.push(g);
        }
        let index = ngrams
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            ngrams,
            idf,
            index,
            n_range: config.n_range,
            min_df: config.min_df,
            document_count: n_docs,
        })
    }

    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn index_of(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    pub fn ngram(&self, index: usize) -> Option<&str> {
        self.ngrams.get(index).map(String::as_str)
    }

    pub fn idf(&self, index: usize) -> f64 {
        self.idf[index]
    }

    pub fn ngrams(&self) -> &[String] {
        &self.ngrams
    }

    pub fn n_range(&self) -> NgramRange {
        self.n_range
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    /// SHA-256 over the ordered n-grams and the bit patterns of their idf.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (g, idf) in self.ngrams.iter().zip(&self.idf) {
            h.update(g.as_bytes());
            h.update([0u8]);
            h.update(idf.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Raw counts times idf, then L2-normalized. Out-of-vocabulary n-grams
    /// are ignored; a document without known n-grams maps to the zero vector.
    pub fn vectorize(&self, text: &str, stopwords: &Stopwords) -> Result<FeatureVector> {
        self.vectorize_tokens(&tokenize(text).tokens, stopwords)
    }

    /// [`Vocabulary::vectorize`] for text that is already tokenized.
    pub fn vectorize_tokens(&self, tokens: &[String], stopwords: &Stopwords) -> Result<FeatureVector> {
        if self.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let kept = remove_stopwords(tokens, stopwords);
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for g in extract_ngrams(&kept, self.n_range) {
            if let Some(i) = self.index_of(&g) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i, c * self.idf[i]))
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        Ok(FeatureVector {
            dimension: self.len(),
            entries,
        })
    }
}

/// Sparse non-negative vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dimension: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn new(dimension: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::invalid("feature indices must be strictly increasing"));
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= dimension {
                return Err(Error::invalid(format!(
                    "feature index {i} out of range for dimension {dimension}"
                )));
            }
        }
        if entries.iter().any(|e| !e.1.is_finite() || e.1 < 0.0) {
            return Err(Error::invalid("feature values must be finite and non-negative"));
        }
        Ok(FeatureVector { dimension, entries })
    }

    pub fn zeros(dimension: usize) -> Self {
        FeatureVector {
            dimension,
            entries: Vec::new(),
        }
    }

    /// Builds a sparse vector from dense values, dropping zeros.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        Self::new(values.len(), entries)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// `[self | other]`, with `other`'s indices shifted past `self`.
    pub fn concat(&self, other: &FeatureVector) -> FeatureVector {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|&(i, v)| (i + self.dimension, v)));
        FeatureVector {
            dimension: self.dimension + other.dimension,
            entries,
        }
    }

    /// Keeps the dimensions listed in `mask` (sorted, unique) and re-indexes
    /// them densely in mask order.
    pub fn select(&self, mask: &[usize]) -> FeatureVector {
        let mut entries = Vec::new();
        let mut e = self.entries.iter().peekable();
        for (new, &old) in mask.iter().enumerate() {
            while e.next_if(|x| x.0 < old).is_some() {}
            if let Some(&&(i, v)) = e.peek() {
                if i == old {
                    entries.push((new, v));
                }
            }
        }
        FeatureVector {
            dimension: mask.len(),
            entries,
        }
    }
}

/// Distinct tokens in sorted order; used by tests and reports.
pub fn distinct_tokens(tokens: &[String]) -> BTreeSet<&str> {
    tokens.iter().map(String::as_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn tokenize_counts_punctuation() {
        let t = tokenize("Hey!! RIP bro :(");
        assert_eq!(t.tokens, toks(&["hey", "rip", "bro"]));
        assert_eq!(t.exclamation_marks, 2);
        assert_eq!(t.question_marks, 0);
        assert_eq!(t.total_tokens(), 3);
    }

    #[test]
    fn tokenize_deletes_periods_inside_letters() {
        assert_eq!(tokenize("R.I.P. angel").tokens, toks(&["rip", "angel"]));
        assert_eq!(tokenize("r.i.p").tokens, toks(&["rip"]));
        assert_eq!(tokenize("3.5 stars").tokens, toks(&["3", "5", "stars"]));
    }

    #[test]
    fn tokenize_keeps_internal_apostrophes() {
        assert_eq!(
            tokenize("Don't 'quote' me, it\u{2019}s fine").tokens,
            toks(&["don't", "quote", "me", "it's", "fine"])
        );
    }

    #[test]
    fn tokenize_empty() {
        assert_eq!(tokenize(""), TokenizedText::default());
    }

    #[test]
    fn stopword_removal() {
        let sw = Stopwords::default();
        assert_eq!(remove_stopwords(&toks(&["i", "miss", "you"]), &sw), toks(&["miss"]));
        assert_eq!(remove_stopwords(&toks(&["rip"]), &sw), toks(&["rip"]));
        assert!(remove_stopwords(&[], &sw).is_empty());
    }

    #[test]
    fn shipped_stopwords_keep_content_terms() {
        let sw = Stopwords::default();
        assert!(sw.len() >= 140);
        for w in ["love", "miss", "rip", "hey", "lol", "just", "know", "like", "wanted"] {
            assert!(!sw.contains(w), "{w} must not be a stopword");
        }
    }

    #[test]
    fn ngram_extraction() {
        let r2 = NgramRange::new(1, 2).unwrap();
        assert_eq!(
            extract_ngrams(&toks(&["love", "miss"]), r2),
            toks(&["love", "miss", "love miss"])
        );
        assert_eq!(extract_ngrams(&toks(&["rip"]), NgramRange::default()), toks(&["rip"]));
        assert!(extract_ngrams(&[], NgramRange::default()).is_empty());
        assert!(NgramRange::new(0, 2).is_err());
        assert!(NgramRange::new(2, 4).is_err());
    }

    fn toy_vocab(min_df: usize) -> Vocabulary {
        let cfg = VocabConfig {
            n_range: NgramRange::exactly(1).unwrap(),
            min_df,
        };
        Vocabulary::build(["miss you", "hey you"], &cfg, &Stopwords::empty()).unwrap()
    }

    #[test]
    fn idf_hand_values() {
        let v = toy_vocab(1);
        // first document's n-grams in lexicographic order, then the second's
        assert_eq!(v.ngrams(), &toks(&["miss", "you", "hey"])[..]);
        let you = v.index_of("you").unwrap();
        let miss = v.index_of("miss").unwrap();
        assert_abs_diff_eq!(v.idf(you), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.idf(miss), 1.5f64.ln() + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.idf(miss), 1.405465, epsilon = 1e-6);
    }

    #[test]
    fn tfidf_hand_values() {
        let v = toy_vocab(1);
        let x = v.vectorize("miss you", &Stopwords::empty()).unwrap();
        assert_abs_diff_eq!(x.get(v.index_of("miss").unwrap()), 0.81480, epsilon = 1e-5);
        assert_abs_diff_eq!(x.get(v.index_of("you").unwrap()), 0.57973, epsilon = 1e-5);

        let y = v.vectorize("you you", &Stopwords::empty()).unwrap();
        assert_eq!(y.entries(), &[(v.index_of("you").unwrap(), 1.0)]);

        let z = v.vectorize("completely unknown", &Stopwords::empty()).unwrap();
        assert_eq!(z.nnz(), 0);
        assert_eq!(z.dimension(), 3);
    }

    #[test]
    fn empty_vocabulary_errors_on_vectorize_only() {
        let v = toy_vocab(3);
        assert!(v.is_empty());
        assert!(matches!(
            v.vectorize("miss you", &Stopwords::empty()),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn build_rejects_zero_documents() {
        let empty: [&str; 0] = [];
        assert!(Vocabulary::build(empty, &VocabConfig::default(), &Stopwords::default()).is_err());
    }

    #[test]
    fn vocabulary_serde_roundtrip() {
        let v = toy_vocab(1);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
        assert_eq!(v.fingerprint(), back.fingerprint());
    }

    #[test]
    fn select_and_concat() {
        let x = FeatureVector::new(4, vec![(0, 1.0), (1, 2.0), (3, 4.0)]).unwrap();
        let s = x.select(&[1, 3]);
        assert_eq!(s.dimension(), 2);
        assert_eq!(s.entries(), &[(0, 2.0), (1, 4.0)]);
        let c = x.concat(&s);
        assert_eq!(c.dimension(), 6);
        assert_eq!(c.get(5), 4.0);
        assert!(FeatureVector::new(2, vec![(1, 1.0), (0, 1.0)]).is_err());
        assert!(FeatureVector::new(2, vec![(2, 1.0)]).is_err());
        assert!(FeatureVector::new(2, vec![(0, -1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn tokenizer_is_idempotent_on_tokens(text in "[a-zA-Z0-9 .,'!?éü]{0,60}") {
            for tok in tokenize(&text).tokens {
                prop_assert_eq!(tokenize(&tok).tokens, vec![tok.clone()]);
            }
        }

        #[test]
        fn nonzero_vectors_have_unit_norm(words in prop::collection::vec("[a-e]{1,2}", 0..30)) {
            let docs = ["a b c d e", "aa ab ac ad", "a aa b bb c"];
            let cfg = VocabConfig { n_range: NgramRange::new(1, 2).unwrap(), min_df: 1 };
            let v = Vocabulary::build(docs, &cfg, &Stopwords::empty()).unwrap();
            let x = v.vectorize(&words.join(" "), &Stopwords::empty()).unwrap();
            if x.nnz() > 0 {
                prop_assert!((x.squared_norm().sqrt() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn unigram_vectors_ignore_token_order(mut words in prop::collection::vec("[a-d]", 1..20)) {
            let docs = ["a b", "b c", "c d", "a d"];
            let cfg = VocabConfig { n_range: NgramRange::exactly(1).unwrap(), min_df: 1 };
            let v = Vocabulary::build(docs, &cfg, &Stopwords::empty()).unwrap();
            let before = v.vectorize(&words.join(" "), &Stopwords::empty()).unwrap();
            words.reverse();
            let after = v.vectorize(&words.join(" "), &Stopwords::empty()).unwrap();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn idf_decreases_with_document_frequency(docs in prop::collection::vec("[a-f]( [a-f]){0,5}", 1..12)) {
            let cfg = VocabConfig { n_range: NgramRange::exactly(1).unwrap(), min_df: 1 };
            let v = Vocabulary::build(docs.iter().map(String::as_str), &cfg, &Stopwords::empty()).unwrap();
            let df = |t: &str| docs.iter().filter(|d| d.split(' ').any(|w| w == t)).count();
            for a in v.ngrams() {
                for b in v.ngrams() {
                    if df(a) < df(b) {
                        prop_assert!(v.idf(v.index_of(a).unwrap()) > v.idf(v.index_of(b).unwrap()));
                    }
                }
            }
        }
    }
}
