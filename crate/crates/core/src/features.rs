//! Feature spaces (n-gram, lexicon metrics, both) and chi-squared selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::resources::TextResources;
use crate::text::{tokenize, FeatureVector, VocabConfig, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Ngram,
    Clt,
    Combined,
}

impl FeatureKind {
    pub fn uses_ngrams(self) -> bool {
        matches!(self, FeatureKind::Ngram | FeatureKind::Combined)
    }

    pub fn uses_clt(self) -> bool {
        matches!(self, FeatureKind::Clt | FeatureKind::Combined)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Ngram => "ngram",
            FeatureKind::Clt => "clt",
            FeatureKind::Combined => "combined",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ngram" => Ok(FeatureKind::Ngram),
            "clt" => Ok(FeatureKind::Clt),
            "combined" => Ok(FeatureKind::Combined),
            other => Err(Error::invalid(format!("unknown feature set {other:?}"))),
        }
    }
}

/// A fitted feature space: `[ngram tf-idf | lexicon metrics]`, optionally
/// restricted to a sorted selection mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub kind: FeatureKind,
    pub vocabulary: Option<Vocabulary>,
    pub clt_names: Vec<String>,
    pub selection_mask: Option<Vec<usize>>,
}

impl FeatureSpace {
    /// Builds the unmasked space from training texts only.
    pub fn build<'a, I>(kind: FeatureKind, texts: I, vocab: &VocabConfig, resources: &TextResources) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let vocabulary = if kind.uses_ngrams() {
            Some(Vocabulary::build(texts, vocab, &resources.stopwords)?)
        } else {
            None
        };
        let clt_names = if kind.uses_clt() {
            resources.clt.metric_names().to_vec()
        } else {
            Vec::new()
        };
        Ok(FeatureSpace {
            kind,
            vocabulary,
            clt_names,
            selection_mask: None,
        })
    }

    /// Dimension before the selection mask.
    pub fn raw_dimension(&self) -> usize {
        self.vocabulary.as_ref().map_or(0, Vocabulary::len) + self.clt_names.len()
    }

    /// Dimension of composed vectors.
    pub fn dimension(&self) -> usize {
        self.selection_mask
            .as_ref()
            .map_or_else(|| self.raw_dimension(), Vec::len)
    }

    pub fn with_mask(mut self, mask: Vec<usize>) -> Result<Self> {
        let raw = self.raw_dimension();
        if mask.windows(2).any(|w| w[0] >= w[1]) || mask.last().is_some_and(|&m| m >= raw) {
            return Err(Error::invalid("selection mask must be sorted, unique and in range"));
        }
        self.selection_mask = Some(mask);
        Ok(self)
    }

    /// Name of a composed (post-mask) dimension: the n-gram or metric name.
    pub fn feature_name(&self, index: usize) -> Option<&str> {
        let raw = match &self.selection_mask {
            Some(m) => *m.get(index)?,
            None => index,
        };
        let n_vocab = self.vocabulary.as_ref().map_or(0, Vocabulary::len);
        if raw < n_vocab {
            self.vocabulary.as_ref()?.ngram(raw)
        } else {
            self.clt_names.get(raw - n_vocab).map(String::as_str)
        }
    }

    /// Fails when the resources would produce different lexicon metrics than
    /// the space was fitted with.
    pub fn check_resources(&self, resources: &TextResources) -> Result<()> {
        if self.kind.uses_clt() && resources.clt.metric_names() != self.clt_names.as_slice() {
            return Err(Error::FeatureSpaceMismatch(format!(
                "space expects {} lexicon metrics [{}], resources provide {} [{}]",
                self.clt_names.len(),
                self.clt_names.join(", "),
                resources.clt.metric_names().len(),
                resources.clt.metric_names().join(", ")
            )));
        }
        Ok(())
    }

    /// SHA-256 identifying the fitted vocabulary, metric names and mask.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.to_string().as_bytes());
        if let Some(v) = &self.vocabulary {
            h.update(v.fingerprint().as_bytes());
        }
        for n in &self.clt_names {
            h.update(n.as_bytes());
            h.update([0u8]);
        }
        if let Some(m) = &self.selection_mask {
            for i in m {
                h.update((*i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn compose_raw(&self, text: &str, resources: &TextResources) -> Result<FeatureVector> {
        let tokens = tokenize(text);
        let ngram = match &self.vocabulary {
            Some(v) => Some(v.vectorize_tokens(&tokens.tokens, &resources.stopwords)?),
            None => None,
        };
        let clt = if self.kind.uses_clt() {
            let profile = resources.clt.profile_tokens(&tokens);
            Some(FeatureVector::from_dense(profile.values())?)
        } else {
            None
        };
        Ok(match (ngram, clt) {
            (Some(a), Some(b)) => a.concat(&b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => FeatureVector::zeros(0),
        })
    }
}

/// Vectorizes a text in the given space; the selection mask is applied last.
pub fn compose(text: &str, space: &FeatureSpace, resources: &TextResources) -> Result<FeatureVector> {
    space.check_resources(resources)?;
    let raw = space.compose_raw(text, resources)?;
    Ok(match &space.selection_mask {
        Some(mask) => raw.select(mask),
        None => raw,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub scores: Vec<f64>,
    pub selected_k: usize,
    pub selected_indices: Vec<usize>,
}

/// Chi-squared score of every dimension using per-class sums of feature
/// values as observed counts.
///
/// For dimension d with class sums `O_c` and class sizes `n_c`,
/// `E_c = (O_pre + O_post) * n_c / n` and the score is
/// `sum_c (O_c - E_c)^2 / E_c`; all-zero dimensions score 0.
pub fn chi2_scores(vectors: &[FeatureVector], labels: &[Label]) -> Result<Vec<f64>> {
    if vectors.len() != labels.len() {
        return Err(Error::invalid("vectors and labels differ in length"));
    }
    let n_post = labels.iter().filter(|l| l.is_post()).count();
    let n = labels.len();
    if n_post == 0 || n_post == n {
        return Err(Error::SingleClass);
    }
    let dim = vectors.first().map_or(0, FeatureVector::dimension);
    let mut observed = [vec![0.0; dim], vec![0.0; dim]];
    for (x, l) in vectors.iter().zip(labels) {
        if x.dimension() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.dimension(),
            });
        }
        let row = &mut observed[l.is_post() as usize];
        for &(i, v) in x.entries() {
            if v < 0.0 {
                return Err(Error::invalid("chi-squared needs non-negative features"));
            }
            row[i] += v;
        }
    }
    let share = [(n - n_post) as f64 / n as f64, n_post as f64 / n as f64];
    Ok((0..dim)
        .map(|d| {
            let total = observed[0][d] + observed[1][d];
            if total <= 0.0 {
                return 0.0;
            }
            (0..2)
                .map(|c| {
                    let e = total * share[c];
                    (observed[c][d] - e).powi(2) / e
                })
                .sum()
        })
        .collect())
}

/// Indices of the `k` highest scores, ties to the lower index, returned
/// sorted ascending. `k` larger than the dimension selects everything.
pub fn select_top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

pub fn chi2_select(vectors: &[FeatureVector], labels: &[Label], k: usize) -> Result<Chi2Result> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let scores = chi2_scores(vectors, labels)?;
    let selected_indices = select_top_k(&scores, k);
    Ok(Chi2Result {
        selected_k: selected_indices.len(),
        scores,
        selected_indices,
    })
}

/// Fits a feature space on training texts, optionally with chi-squared
/// selection of `select_k` dimensions, and returns it with the (masked)
/// training vectors.
pub fn fit_feature_space(
    kind: FeatureKind,
    texts: &[&str],
    labels: &[Label],
    vocab: &VocabConfig,
    select_k: Option<usize>,
    resources: &TextResources,
) -> Result<(FeatureSpace, Vec<FeatureVector>)> {
    let space = FeatureSpace::build(kind, texts.iter().copied(), vocab, resources)?;
    let vectors = texts
        .iter()
        .map(|t| space.compose_raw(t, resources))
        .collect::<Result<Vec<_>>>()?;
    match select_k {
        None => Ok((space, vectors)),
        Some(k) => {
            let chi = chi2_select(&vectors, labels, k)?;
            let vectors = vectors.iter().map(|v| v.select(&chi.selected_indices)).collect();
            Ok((space.with_mask(chi.selected_indices)?, vectors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::SENTIMENT_NEU;
    use crate::text::{NgramRange, Stopwords};
    use proptest::prelude::*;

    fn fv(dense: &[f64]) -> FeatureVector {
        FeatureVector::from_dense(dense).unwrap()
    }

    #[test]
    fn chi2_hand_value() {
        // feature totals post = 3, pre = 1 over two balanced documents per class
        let xs = [fv(&[2.0, 1.0]), fv(&[1.0, 1.0]), fv(&[1.0, 1.0]), fv(&[0.0, 1.0])];
        let ys = [Label::Post, Label::Post, Label::Pre, Label::Pre];
        let s = chi2_scores(&xs, &ys).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn chi2_edge_cases() {
        let xs = [fv(&[0.0]), fv(&[0.0])];
        assert_eq!(chi2_scores(&xs, &[Label::Pre, Label::Post]).unwrap(), vec![0.0]);
        assert!(matches!(chi2_scores(&xs, &[Label::Pre, Label::Pre]), Err(Error::SingleClass)));
    }

    #[test]
    fn top_k_selection() {
        let s = [0.5, 2.0, 2.0, 0.1];
        assert_eq!(select_top_k(&s, 2), vec![1, 2]);
        assert_eq!(select_top_k(&s, 1), vec![1]);
        assert_eq!(select_top_k(&s, 10), vec![0, 1, 2, 3]);
    }

    fn resources() -> TextResources {
        TextResources::default()
    }

    #[test]
    fn clt_space_on_empty_text() {
        let r = resources();
        let space = FeatureSpace::build(FeatureKind::Clt, ["x"], &VocabConfig::default(), &r).unwrap();
        let x = compose("", &space, &r).unwrap();
        assert_eq!(x.nnz(), 1);
        let neu = r.clt.metric_names().iter().position(|n| n == SENTIMENT_NEU).unwrap();
        assert_eq!(x.entries(), &[(neu, 1.0)]);
    }

    #[test]
    fn combined_space_with_oov_text() {
        let r = resources();
        let vocab = VocabConfig { n_range: NgramRange::exactly(1).unwrap(), min_df: 1 };
        let space = FeatureSpace::build(FeatureKind::Combined, ["miss heaven", "hey lol"], &vocab, &r).unwrap();
        let n_vocab = space.vocabulary.as_ref().unwrap().len();
        assert_eq!(space.raw_dimension(), n_vocab + r.clt.metric_names().len());
        let x = compose("zzz qqq", &space, &r).unwrap();
        assert!(x.nnz() > 0);
        assert!(x.entries().iter().all(|&(i, _)| i >= n_vocab));
        assert_eq!(space.feature_name(0), Some("heaven"));
        assert_eq!(space.feature_name(n_vocab), Some("sadness"));
    }

    #[test]
    fn masked_space_reindexes() {
        let r = TextResources::new(Stopwords::empty(), resources().clt);
        let vocab = VocabConfig { n_range: NgramRange::exactly(1).unwrap(), min_df: 1 };
        let space = FeatureSpace::build(FeatureKind::Ngram, ["a b c d"], &vocab, &r).unwrap();
        let full = compose("a b c d d", &space, &r).unwrap();
        let masked = space.clone().with_mask(vec![1, 3]).unwrap();
        assert_eq!(masked.dimension(), 2);
        let x = compose("a b c d d", &masked, &r).unwrap();
        assert_eq!(x.entries(), &[(0, full.get(1)), (1, full.get(3))]);
        assert_eq!(masked.feature_name(1), Some("d"));
        assert!(space.with_mask(vec![3, 1]).is_err());
    }

    #[test]
    fn mismatched_resources_rejected() {
        let r = resources();
        let space = FeatureSpace::build(FeatureKind::Clt, ["x"], &VocabConfig::default(), &r).unwrap();
        let other = crate::lexicon::CltExtractor::new(
            crate::lexicon::Lexicon::parse("only: one").unwrap(),
            crate::lexicon::SentimentLexicon::demo(),
            Default::default(),
        )
        .unwrap();
        let r2 = TextResources::new(Stopwords::default(), other);
        assert!(matches!(compose("x", &space, &r2), Err(Error::FeatureSpaceMismatch(_))));
    }

    fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
        (2usize..6, 2usize..12).prop_flat_map(|(d, n)| {
            (
                prop::collection::vec(prop::collection::vec(0.0f64..5.0, d), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn chi2_permutation_invariant((rows, mut ys) in dataset()) {
            ys[0] = true;
            ys[1] = false;
            let xs: Vec<_> = rows.iter().map(|r| fv(r)).collect();
            let ls: Vec<_> = ys.iter().map(|&p| Label::from_post(p)).collect();
            let a = chi2_scores(&xs, &ls).unwrap();
            let mut rx = xs.clone();
            let mut rl = ls.clone();
            rx.reverse();
            rl.reverse();
            let b = chi2_scores(&rx, &rl).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }

        #[test]
        fn uniform_scaling_keeps_selection((rows, mut ys) in dataset(), s in 0.1f64..10.0, k in 1usize..4) {
            ys[0] = true;
            ys[1] = false;
            // snap to a grid so near-ties cannot swap under rounding
            let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v.round()).collect()).collect();
            let ls: Vec<_> = ys.iter().map(|&p| Label::from_post(p)).collect();
            let xs: Vec<_> = rows.iter().map(|r| fv(r)).collect();
            let scaled: Vec<_> = rows.iter().map(|r| fv(&r.iter().map(|v| v * s).collect::<Vec<_>>())).collect();
            let a = chi2_scores(&xs, &ls).unwrap();
            let b = chi2_scores(&scaled, &ls).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u * s - v).abs() <= 1e-9 * (1.0 + v.abs()));
            }
            let mut sorted = a.clone();
            sorted.sort_by(|x, y| y.total_cmp(x));
            // only a near-tie at the cut can legitimately flip the tie-break
            let clear_cut = k >= sorted.len() || sorted[k - 1] - sorted[k] > 1e-6;
            if clear_cut {
                prop_assert_eq!(select_top_k(&a, k), select_top_k(&b, k));
            }
        }

        #[test]
        fn mask_preserves_values(dense in prop::collection::vec(0.0f64..3.0, 1..12), pick in prop::collection::vec(any::<bool>(), 12)) {
            let x = fv(&dense);
            let mask: Vec<usize> = (0..dense.len()).filter(|&i| pick[i]).collect();
            let y = x.select(&mask);
            for (new, &old) in mask.iter().enumerate() {
                prop_assert_eq!(y.get(new).to_bits(), x.get(old).to_bits());
            }
        }
    }
}
