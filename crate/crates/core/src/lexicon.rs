//! Dictionary-category proportions and lexicon sentiment.
//!
//! A category dictionary is a UTF-8 file of lines
//! `category_name: pattern, pattern, ...`, where a trailing `*` turns a
//! pattern into a prefix match. Blank lines and lines starting with `#` are
//! ignored. Sentiment valences come from a `token<TAB>valence` file with
//! valences in `[-4, 4]`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{tokenize, TokenizedText};

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.txt");
const DEFAULT_SENTIMENT: &str = include_str!("../data/sentiment.tsv");
const DEFAULT_NEGATIONS: &str = include_str!("../data/negations.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconCategory {
    pub name: String,
    pub exact_terms: BTreeSet<String>,
    pub prefix_terms: BTreeSet<String>,
}

impl LexiconCategory {
    pub fn matches(&self, token: &str) -> bool {
        self.exact_terms.contains(token) || self.prefix_terms.iter().any(|p| token.starts_with(p.as_str()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub categories: Vec<LexiconCategory>,
}

impl Lexicon {
    pub fn parse(content: &str) -> Result<Self> {
        let mut categories: Vec<LexiconCategory> = Vec::new();
        for (i, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let (name, patterns) = line
                .split_once(':')
                .ok_or_else(|| err("expected `category: pattern, ...`".into()))?;
            let name = name.trim();
            if name.is_empty() {
                return Err(err("empty category name".into()));
            }
            if categories.iter().any(|c| c.name == name) {
                return Err(err(format!("duplicate category {name:?}")));
            }
            let mut cat = LexiconCategory {
                name: name.to_string(),
                exact_terms: BTreeSet::new(),
                prefix_terms: BTreeSet::new(),
            };
            for p in patterns.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let p = p.to_lowercase();
                match p.find('*') {
                    None => {
                        cat.exact_terms.insert(p);
                    }
                    Some(pos) if pos == p.len() - 1 && pos > 0 => {
                        cat.prefix_terms.insert(p[..pos].to_string());
                    }
                    Some(_) => return Err(err(format!("malformed pattern {p:?}: '*' only allowed at the end"))),
                }
            }
            categories.push(cat);
        }
        Ok(Lexicon { categories })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content)
    }

    /// The bundled demonstration dictionary.
    pub fn demo() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

/// Fraction of tokens matched by the category; 0 for no tokens.
pub fn category_proportion(tokens: &[String], category: &LexiconCategory) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let hits = tokens.iter().filter(|t| category.matches(t)).count();
    hits as f64 / tokens.len() as f64
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    valences: HashMap<String, f64>,
    negations: HashSet<String>,
}

impl SentimentLexicon {
    pub fn new(valences: HashMap<String, f64>, negations: HashSet<String>) -> Result<Self> {
        for (t, v) in &valences {
            if !(-4.0..=4.0).contains(v) {
                return Err(Error::invalid(format!("valence of {t:?} outside [-4, 4]: {v}")));
            }
        }
        Ok(SentimentLexicon {
            valences: valences.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect(),
            negations: negations.into_iter().map(|n| normalize_negation(&n)).collect(),
        })
    }

    pub fn parse(valences_tsv: &str, negations: &str) -> Result<Self> {
        let mut valences = HashMap::new();
        for (i, line) in valences_tsv.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let (tok, val) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `token<TAB>valence`".into()))?;
            let v: f64 = val
                .trim()
                .parse()
                .map_err(|_| err(format!("bad valence {val:?}")))?;
            if !(-4.0..=4.0).contains(&v) {
                return Err(err(format!("valence {v} outside [-4, 4]")));
            }
            valences.insert(tok.trim().to_lowercase(), v);
        }
        let negations = negations
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        Self::new(valences, negations)
    }

    pub fn from_paths(valences: &Path, negations: Option<&Path>) -> Result<Self> {
        let v = std::fs::read_to_string(valences).map_err(|e| Error::io(valences, e))?;
        let n = match negations {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => DEFAULT_NEGATIONS.to_string(),
        };
        Self::parse(&v, &n)
    }

    pub fn demo() -> Self {
        Self::parse(DEFAULT_SENTIMENT, DEFAULT_NEGATIONS).expect("bundled sentiment lexicon parses")
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    /// Negation cues match with apostrophes removed, so `don't` hits `dont`.
    pub fn is_negation(&self, token: &str) -> bool {
        self.negations.contains(&normalize_negation(token))
    }
}

fn normalize_negation(token: &str) -> String {
    token.chars().filter(|c| *c != '\'').collect::<String>().to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScores {
    pub pos: f64,
    pub neg: f64,
    pub neu: f64,
}

const NEGATION_WINDOW: usize = 3;

/// Shares of tokens with positive and negative effective valence.
///
/// A token's valence flips sign when any of the three preceding tokens is a
/// negation cue. Tokens without a valence count as neutral.
pub fn sentiment_scores(tokens: &[String], lexicon: &SentimentLexicon) -> SentimentScores {
    if tokens.is_empty() {
        return SentimentScores { pos: 0.0, neg: 0.0, neu: 1.0 };
    }
    let (mut pos, mut neg) = (0usize, 0usize);
    for (i, t) in tokens.iter().enumerate() {
        let Some(v) = lexicon.valence(t) else { continue };
        let negated = tokens[i.saturating_sub(NEGATION_WINDOW)..i]
            .iter()
            .any(|p| lexicon.is_negation(p));
        let v = if negated { -v } else { v };
        if v > 0.0 {
            pos += 1;
        } else if v < 0.0 {
            neg += 1;
        }
    }
    let n = tokens.len() as f64;
    let pos = pos as f64 / n;
    let neg = neg as f64 / n;
    SentimentScores { pos, neg, neu: 1.0 - pos - neg }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub word_count_cap: usize,
}

impl Default for CltConfig {
    fn default() -> Self {
        CltConfig { word_count_cap: 200 }
    }
}

pub const UNIQUE_WORDS: &str = "unique_word_proportion";
pub const QUESTION_MARKS: &str = "question_mark_rate";
pub const EXCLAMATION_MARKS: &str = "exclamation_mark_rate";
pub const WORD_COUNT: &str = "word_count_norm";
pub const SENTIMENT_POS: &str = "sentiment_pos";
pub const SENTIMENT_NEG: &str = "sentiment_neg";
pub const SENTIMENT_NEU: &str = "sentiment_neu";

/// Named metrics of one text, all in `[0, 1]`, in the extractor's order.
#[derive(Debug, Clone, PartialEq)]
pub struct CltProfile {
    names: Arc<Vec<String>>,
    values: Vec<f64>,
}

impl CltProfile {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Computes [`CltProfile`]s in a fixed order: one proportion per lexicon
/// category (file order), then unique-word proportion, question and
/// exclamation mark rates, capped word count, sentiment pos/neg/neu.
#[derive(Debug, Clone)]
pub struct CltExtractor {
    lexicon: Lexicon,
    sentiment: SentimentLexicon,
    config: CltConfig,
    names: Arc<Vec<String>>,
}

impl CltExtractor {
    pub fn new(lexicon: Lexicon, sentiment: SentimentLexicon, config: CltConfig) -> Result<Self> {
        if config.word_count_cap == 0 {
            return Err(Error::invalid("word_count_cap must be positive"));
        }
        let mut names: Vec<String> = lexicon.categories.iter().map(|c| c.name.clone()).collect();
        names.extend(
            [UNIQUE_WORDS, QUESTION_MARKS, EXCLAMATION_MARKS, WORD_COUNT, SENTIMENT_POS, SENTIMENT_NEG, SENTIMENT_NEU]
                .map(String::from),
        );
        let unique: HashSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::invalid("lexicon category names collide with built-in metric names"));
        }
        Ok(CltExtractor { lexicon, sentiment, config, names: Arc::new(names) })
    }

    pub fn metric_names(&self) -> &[String] {
        &self.names
    }

    pub fn config(&self) -> CltConfig {
        self.config
    }

    pub fn profile(&self, text: &str) -> CltProfile {
        self.profile_tokens(&tokenize(text))
    }

    pub fn profile_tokens(&self, t: &TokenizedText) -> CltProfile {
        let n = t.total_tokens();
        let mut values = Vec::with_capacity(self.names.len());
        values.extend(self.lexicon.categories.iter().map(|c| category_proportion(&t.tokens, c)));
        let distinct: HashSet<&String> = t.tokens.iter().collect();
        values.push(if n == 0 { 0.0 } else { distinct.len() as f64 / n as f64 });
        let rate = |count: usize| {
            if count == 0 {
                0.0
            } else {
                (count as f64 / (n + count) as f64).clamp(0.0, 1.0)
            }
        };
        values.push(rate(t.question_marks));
        values.push(rate(t.exclamation_marks));
        values.push((n as f64 / self.config.word_count_cap as f64).min(1.0));
        let s = sentiment_scores(&t.tokens, &self.sentiment);
        values.extend([s.pos, s.neg, s.neu]);
        CltProfile { names: Arc::clone(&self.names), values }
    }
}
