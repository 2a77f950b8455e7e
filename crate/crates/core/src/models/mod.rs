//! Classifiers, prediction, informative features and model persistence.

mod gbt;
mod logistic;
mod nb;
mod svm;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use gbt::{train_gbt, GbtParams, GbtSettings, Node, Tree};
pub use logistic::{train_lr, LogisticObjective, LogisticSettings};
pub use nb::{train_nb, NaiveBayesParams};
pub use svm::{dual_objective, primal_objective, solve_svm_dual, train_svm, SvmSettings, SvmSolution};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::{compose, FeatureSpace};
use crate::resources::TextResources;
use crate::text::{tokenize, FeatureVector};

pub const FORMAT_VERSION: u32 = 1;

/// Validates a training set and returns its dimension.
pub(crate) fn check_training_set(vectors: &[FeatureVector], labels: &[Label]) -> Result<usize> {
    if vectors.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    let Some(first) = vectors.first() else {
        return Err(Error::invalid("empty training set"));
    };
    let dim = first.dimension();
    if let Some(x) = vectors.iter().find(|x| x.dimension() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.dimension(),
        });
    }
    let n_post = labels.iter().filter(|l| l.is_post()).count();
    if n_post == 0 || n_post == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(dim)
}

/// Weights and bias of a linear decision function, with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Gradient max-norm (LR) or largest projected dual gradient (SVM) at exit.
    pub final_violation: f64,
}

impl LinearParams {
    pub fn margin(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Baseline,
    Nb,
    Lr,
    Svm,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Baseline,
        ModelKind::Nb,
        ModelKind::Lr,
        ModelKind::Svm,
        ModelKind::Gbt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Nb => "nb",
            ModelKind::Lr => "lr",
            ModelKind::Svm => "svm",
            ModelKind::Gbt => "gbt",
        }
    }

    /// Default hyperparameters for this kind.
    pub fn default_spec(self) -> ModelSpec {
        match self {
            ModelKind::Baseline => ModelSpec::Baseline,
            ModelKind::Nb => ModelSpec::Nb { alpha: 1.0 },
            ModelKind::Lr => ModelSpec::Lr(LogisticSettings::default()),
            ModelKind::Svm => ModelSpec::Svm(SvmSettings::default()),
            ModelKind::Gbt => ModelSpec::Gbt(GbtSettings::default()),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model {s:?}")))
    }
}

/// A model kind with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Baseline,
    Nb { alpha: f64 },
    Lr(LogisticSettings),
    Svm(SvmSettings),
    Gbt(GbtSettings),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Baseline => ModelKind::Baseline,
            ModelSpec::Nb { .. } => ModelKind::Nb,
            ModelSpec::Lr(_) => ModelKind::Lr,
            ModelSpec::Svm(_) => ModelKind::Svm,
            ModelSpec::Gbt(_) => ModelKind::Gbt,
        }
    }

    fn hyperparameters(&self) -> Result<Value> {
        Ok(match self {
            ModelSpec::Baseline => Value::Object(Default::default()),
            ModelSpec::Nb { alpha } => serde_json::json!({ "alpha": alpha }),
            ModelSpec::Lr(s) => serde_json::to_value(s)?,
            ModelSpec::Svm(s) => serde_json::to_value(s)?,
            ModelSpec::Gbt(s) => serde_json::to_value(s)?,
        })
    }

    fn from_hyperparameters(kind: ModelKind, v: Value) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Alpha {
            alpha: f64,
        }
        Ok(match kind {
            ModelKind::Baseline => ModelSpec::Baseline,
            ModelKind::Nb => ModelSpec::Nb {
                alpha: serde_json::from_value::<Alpha>(v)?.alpha,
            },
            ModelKind::Lr => ModelSpec::Lr(serde_json::from_value(v)?),
            ModelKind::Svm => ModelSpec::Svm(serde_json::from_value(v)?),
            ModelKind::Gbt => ModelSpec::Gbt(serde_json::from_value(v)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    Baseline,
    NaiveBayes(NaiveBayesParams),
    Linear(LinearParams),
    Trees(GbtParams),
}

impl Parameters {
    fn dimension(&self) -> Option<usize> {
        match self {
            Parameters::Baseline => None,
            Parameters::NaiveBayes(p) => Some(p.dimension()),
            Parameters::Linear(p) => Some(p.weights.len()),
            Parameters::Trees(p) => Some(p.dimension),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    /// `None` only for the baseline, which reads raw text.
    pub feature_space: Option<FeatureSpace>,
    pub parameters: Parameters,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn baseline() -> Self {
        TrainedModel {
            spec: ModelSpec::Baseline,
            feature_space: None,
            parameters: Parameters::Baseline,
        }
    }
}

/// On-disk layout of a model file.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    format_version: u32,
    kind: ModelKind,
    feature_space: Option<FeatureSpace>,
    parameters: Value,
    hyperparameters: Value,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        let parameters = match &self.parameters {
            Parameters::Baseline => Value::Object(Default::default()),
            Parameters::NaiveBayes(p) => serde_json::to_value(p)?,
            Parameters::Linear(p) => serde_json::to_value(p)?,
            Parameters::Trees(p) => serde_json::to_value(p)?,
        };
        let record = ModelRecord {
            format_version: FORMAT_VERSION,
            kind: self.kind(),
            feature_space: self.feature_space.clone(),
            parameters,
            hyperparameters: self.spec.hyperparameters()?,
        };
        Ok(serde_json::to_string(&record)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(s)?;
        let version = raw
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::invalid("model file lacks format_version"))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::UnsupportedVersion(u32::try_from(version).unwrap_or(u32::MAX)));
        }
        let record: ModelRecord = serde_json::from_value(raw)?;
        let spec = ModelSpec::from_hyperparameters(record.kind, record.hyperparameters)?;
        let parameters = match record.kind {
            ModelKind::Baseline => Parameters::Baseline,
            ModelKind::Nb => Parameters::NaiveBayes(serde_json::from_value(record.parameters)?),
            ModelKind::Lr | ModelKind::Svm => Parameters::Linear(serde_json::from_value(record.parameters)?),
            ModelKind::Gbt => Parameters::Trees(serde_json::from_value(record.parameters)?),
        };
        let model = TrainedModel {
            spec,
            feature_space: record.feature_space,
            parameters,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        match (&self.feature_space, self.parameters.dimension()) {
            (None, None) => Ok(()),
            (Some(space), Some(dim)) if space.dimension() == dim => Ok(()),
            (Some(space), Some(dim)) => Err(Error::DimensionMismatch {
                expected: space.dimension(),
                found: dim,
            }),
            _ => Err(Error::invalid("feature space does not fit the model kind")),
        }
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let json = model.to_json()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(json.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut s = String::new();
    std::io::Read::read_to_string(&mut BufReader::new(file), &mut s).map_err(|e| Error::io(path, e))?;
    TrainedModel::from_json(&s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Probability of post (NB, LR, GBT), margin (SVM) or 0/1 (baseline).
    pub score: f64,
}

impl Prediction {
    fn from_probability(p: f64) -> Self {
        Prediction {
            label: Label::from_post(p >= 0.5),
            score: p,
        }
    }

    fn from_margin(m: f64) -> Self {
        Prediction {
            label: Label::from_post(m >= 0.0),
            score: m,
        }
    }
}

/// Post iff the text contains the token `rip`.
pub fn baseline_predict(text: &str) -> Prediction {
    let hit = tokenize(text).tokens.iter().any(|t| t == "rip");
    Prediction {
        label: Label::from_post(hit),
        score: if hit { 1.0 } else { 0.0 },
    }
}

/// Scores an already composed vector. The baseline reads text, so it is
/// rejected here; use [`predict_text`].
pub fn predict(model: &TrainedModel, x: &FeatureVector) -> Result<Prediction> {
    let expected = model
        .parameters
        .dimension()
        .ok_or_else(|| Error::invalid("the baseline classifies text, not vectors"))?;
    if x.dimension() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: x.dimension(),
        });
    }
    Ok(match (&model.parameters, model.kind()) {
        (Parameters::NaiveBayes(p), _) => Prediction::from_probability(p.posterior_post(x)),
        (Parameters::Linear(p), ModelKind::Svm) => Prediction::from_margin(p.margin(x)),
        (Parameters::Linear(p), _) => Prediction::from_probability(logistic::sigmoid(p.margin(x))),
        (Parameters::Trees(p), _) => Prediction::from_probability(p.probability(x)),
        (Parameters::Baseline, _) => unreachable!("baseline has no dimension"),
    })
}

pub fn predict_text(model: &TrainedModel, text: &str, resources: &TextResources) -> Result<Prediction> {
    match &model.feature_space {
        None => Ok(baseline_predict(text)),
        Some(space) => predict(model, &compose(text, space, resources)?),
    }
}

/// Trains `spec` on composed vectors; `space` is stored with the model.
pub fn train(spec: &ModelSpec, vectors: &[FeatureVector], labels: &[Label], space: FeatureSpace) -> Result<TrainedModel> {
    if let Some(x) = vectors.iter().find(|x| x.dimension() != space.dimension()) {
        return Err(Error::DimensionMismatch {
            expected: space.dimension(),
            found: x.dimension(),
        });
    }
    let parameters = match spec {
        ModelSpec::Baseline => return Ok(TrainedModel::baseline()),
        ModelSpec::Nb { alpha } => Parameters::NaiveBayes(train_nb(vectors, labels, *alpha)?),
        ModelSpec::Lr(s) => Parameters::Linear(train_lr(vectors, labels, s)?),
        ModelSpec::Svm(s) => Parameters::Linear(train_svm(vectors, labels, s)?),
        ModelSpec::Gbt(s) => Parameters::Trees(train_gbt(vectors, labels, s)?),
    };
    Ok(TrainedModel {
        spec: *spec,
        feature_space: Some(space),
        parameters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InformativeFeatures {
    /// Strongest evidence for each class, strongest first.
    Signed {
        post: Vec<RankedFeature>,
        pre: Vec<RankedFeature>,
    },
    /// Total split gain, without direction.
    Gain(Vec<RankedFeature>),
}

fn top_by(scores: &[f64], space: &FeatureSpace, k: usize, keep: impl Fn(f64) -> bool, key: impl Fn(f64) -> f64) -> Vec<RankedFeature> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| keep(scores[i])).collect();
    idx.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])).then(a.cmp(&b)));
    idx.into_iter()
        .take(k)
        .map(|i| RankedFeature {
            name: space.feature_name(i).unwrap_or("?").to_string(),
            score: scores[i],
        })
        .collect()
}

/// Top `k` features per class (linear models and NB) or by split gain (GBT).
pub fn informative_features(model: &TrainedModel, k: usize) -> Result<InformativeFeatures> {
    let space = model
        .feature_space
        .as_ref()
        .ok_or_else(|| Error::invalid("the baseline has no features to rank"))?;
    let signed = |scores: &[f64]| InformativeFeatures::Signed {
        post: top_by(scores, space, k, |s| s > 0.0, |s| s),
        pre: top_by(scores, space, k, |s| s < 0.0, |s| -s),
    };
    Ok(match &model.parameters {
        Parameters::Baseline => return Err(Error::invalid("the baseline has no features to rank")),
        Parameters::NaiveBayes(p) => signed(&p.log_ratios()),
        Parameters::Linear(p) => signed(&p.weights),
        Parameters::Trees(p) => InformativeFeatures::Gain(top_by(&p.gain_importance(), space, k, |s| s > 0.0, |s| s)),
    })
}
