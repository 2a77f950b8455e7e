//! Bundled text resources shared by feature extraction.

use crate::lexicon::{CltConfig, CltExtractor, Lexicon, SentimentLexicon};
use crate::text::Stopwords;

/// Stopwords for n-grams plus the lexicon metric extractor.
#[derive(Debug, Clone)]
pub struct TextResources {
    pub stopwords: Stopwords,
    pub clt: CltExtractor,
}

impl TextResources {
    pub fn new(stopwords: Stopwords, clt: CltExtractor) -> Self {
        TextResources { stopwords, clt }
    }
}

impl Default for TextResources {
    /// Shipped stopword list, demo dictionary and sentiment lexicon.
    fn default() -> Self {
        let clt = CltExtractor::new(Lexicon::demo(), SentimentLexicon::demo(), CltConfig::default())
            .expect("bundled resources are consistent");
        TextResources {
            stopwords: Stopwords::default(),
            clt,
        }
    }
}
