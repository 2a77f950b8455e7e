//! Classification of social media content as written before or after the
//! death of the profile owner.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: comments, profiles, JSONL ingestion, labeling, splits and
//!   descriptive statistics.
//! - [`text`]: tokenizer, stopwords, n-grams and TF-IDF vocabularies.
//! - [`lexicon`]: dictionary-category proportions and a negation-aware
//!   valence scorer, bundled into a fixed-order metric profile.
//! - [`features`]: n-gram, lexicon and combined feature spaces plus
//!   chi-squared selection.
//! - [`models`]: the `rip` keyword baseline, multinomial naive Bayes,
//!   logistic regression, linear SVM and gradient boosted trees.
//! - [`evaluation`]: metrics, cross-validation, grid search, hypothesis
//!   tests, early detection curves and error export.
//! - [`synth`]: a seeded generator of labeled synthetic corpora.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod lexicon;
pub mod models;
pub mod resources;
pub mod synth;
pub mod text;

pub use corpus::{Comment, Corpus, Document, Label, Profile, UnitKind};
pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureSpace};
pub use models::{ModelKind, Prediction, TrainedModel};
pub use resources::TextResources;
pub use text::FeatureVector;
