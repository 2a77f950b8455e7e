use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{stratified_kfold, Document, Label};
use crate::error::{Error, Result};
use crate::features::{fit_feature_space, FeatureKind};
use crate::models::{
    predict_text, train, GbtSettings, LogisticSettings, ModelKind, ModelSpec, Prediction, SvmSettings, TrainedModel,
};
use crate::resources::TextResources;
use crate::text::VocabConfig;

use super::metrics::{confusion_and_metrics, EvalMetrics, MeanMetrics};

/// Everything needed to fit a classifier from labeled text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub features: FeatureKind,
    pub model: ModelSpec,
    pub select_k: Option<usize>,
    pub vocab: VocabConfig,
}

impl PipelineConfig {
    pub fn new(features: FeatureKind, model: ModelSpec) -> Self {
        PipelineConfig {
            features,
            model,
            select_k: None,
            vocab: VocabConfig::default(),
        }
    }
}

pub(crate) fn labels_of(docs: &[&Document]) -> Result<Vec<Label>> {
    docs.iter()
        .map(|d| d.label.ok_or_else(|| Error::Unlabeled(d.source_id.clone())))
        .collect()
}

fn fit_refs(config: &PipelineConfig, docs: &[&Document], resources: &TextResources) -> Result<TrainedModel> {
    let labels = labels_of(docs)?;
    if config.model.kind() == ModelKind::Baseline {
        return Ok(TrainedModel::baseline());
    }
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    let (space, vectors) = fit_feature_space(config.features, &texts, &labels, &config.vocab, config.select_k, resources)?;
    train(&config.model, &vectors, &labels, space)
}

/// Fits vocabulary, selection and model on `docs` only.
pub fn fit_pipeline(config: &PipelineConfig, docs: &[Document], resources: &TextResources) -> Result<TrainedModel> {
    let refs: Vec<&Document> = docs.iter().collect();
    fit_refs(config, &refs, resources)
}

pub fn predict_documents(model: &TrainedModel, docs: &[&Document], resources: &TextResources) -> Result<Vec<Prediction>> {
    docs.iter().map(|d| predict_text(model, &d.text, resources)).collect()
}

pub fn evaluate(model: &TrainedModel, docs: &[Document], resources: &TextResources) -> Result<EvalMetrics> {
    let refs: Vec<&Document> = docs.iter().collect();
    evaluate_refs(model, &refs, resources)
}

fn evaluate_refs(model: &TrainedModel, docs: &[&Document], resources: &TextResources) -> Result<EvalMetrics> {
    let truth = labels_of(docs)?;
    let pred: Vec<Label> = predict_documents(model, docs, resources)?.iter().map(|p| p.label).collect();
    confusion_and_metrics(&truth, &pred)
}

/// Stratified folds over labeled documents.
pub fn make_folds(docs: &[Document], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let refs: Vec<&Document> = docs.iter().collect();
    stratified_kfold(&labels_of(&refs)?, k, seed)
}

/// Fits the pipeline on every fold except `fold`.
pub fn fit_fold(
    config: &PipelineConfig,
    docs: &[Document],
    folds: &[Vec<usize>],
    fold: usize,
    resources: &TextResources,
) -> Result<TrainedModel> {
    let train: Vec<&Document> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != fold)
        .flat_map(|(_, f)| f.iter().map(|&j| &docs[j]))
        .collect();
    fit_refs(config, &train, resources)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub config: PipelineConfig,
    pub seed: u64,
    pub folds: usize,
    pub n_documents: usize,
    pub per_fold: Vec<EvalMetrics>,
    pub mean: MeanMetrics,
    /// Fingerprint of each fold's fitted feature space (none for the baseline).
    pub feature_space_fingerprints: Vec<Option<String>>,
}

/// k-fold cross-validation. Each fold's vocabulary, selection and model see
/// only the training folds. Folds run in parallel; results are kept in fold
/// order.
pub fn cross_validate(
    config: &PipelineConfig,
    docs: &[Document],
    k: usize,
    seed: u64,
    resources: &TextResources,
) -> Result<CvReport> {
    let folds = make_folds(docs, k, seed)?;
    cross_validate_on(config, docs, &folds, seed, resources)
}

fn cross_validate_on(
    config: &PipelineConfig,
    docs: &[Document],
    folds: &[Vec<usize>],
    seed: u64,
    resources: &TextResources,
) -> Result<CvReport> {
    let results: Vec<(EvalMetrics, Option<String>)> = (0..folds.len())
        .into_par_iter()
        .map(|i| {
            let run = || -> Result<_> {
                let model = fit_fold(config, docs, folds, i, resources)?;
                let held: Vec<&Document> = folds[i].iter().map(|&j| &docs[j]).collect();
                let metrics = evaluate_refs(&model, &held, resources)?;
                Ok((metrics, model.feature_space.as_ref().map(|s| s.fingerprint())))
            };
            run().map_err(|e| Error::Fold {
                fold: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let (per_fold, feature_space_fingerprints): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(CvReport {
        config: *config,
        seed,
        folds: folds.len(),
        n_documents: docs.len(),
        mean: MeanMetrics::of(&per_fold),
        per_fold,
        feature_space_fingerprints,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub best_index: usize,
    pub best: PipelineConfig,
    pub reports: Vec<CvReport>,
}

/// Cross-validates every configuration over the same folds and keeps the
/// highest mean F1; ties go to the earlier configuration.
pub fn grid_search(
    grid: &[PipelineConfig],
    docs: &[Document],
    k: usize,
    seed: u64,
    resources: &TextResources,
) -> Result<GridReport> {
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let folds = make_folds(docs, k, seed)?;
    let reports = grid
        .iter()
        .map(|c| cross_validate_on(c, docs, &folds, seed, resources))
        .collect::<Result<Vec<_>>>()?;
    let best_index = best_by_f1(&reports);
    Ok(GridReport {
        best_index,
        best: reports[best_index].config,
        reports,
    })
}

pub(crate) fn best_by_f1(reports: &[CvReport]) -> usize {
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.mean.f1 > reports[best].mean.f1 {
            best = i;
        }
    }
    best
}

/// The default hyperparameter grid for one model kind, crossed with the
/// given selection sizes.
pub fn default_grid(kind: ModelKind, features: FeatureKind, select_ks: &[Option<usize>], vocab: VocabConfig) -> Vec<PipelineConfig> {
    let specs: Vec<ModelSpec> = match kind {
        ModelKind::Baseline => vec![ModelSpec::Baseline],
        ModelKind::Nb => [0.1, 0.5, 1.0].map(|alpha| ModelSpec::Nb { alpha }).to_vec(),
        ModelKind::Lr => [1e-4, 1e-3, 1e-2, 1e-1]
            .map(|lambda| ModelSpec::Lr(LogisticSettings { lambda, ..Default::default() }))
            .to_vec(),
        ModelKind::Svm => [0.1, 1.0, 10.0]
            .map(|c| ModelSpec::Svm(SvmSettings { c, ..Default::default() }))
            .to_vec(),
        ModelKind::Gbt => [(2, 50), (2, 100), (3, 50), (3, 100)]
            .map(|(depth, rounds)| {
                ModelSpec::Gbt(GbtSettings {
                    depth,
                    rounds,
                    learning_rate: 0.3,
                })
            })
            .to_vec(),
    };
    let ks: &[Option<usize>] = if select_ks.is_empty() || kind == ModelKind::Baseline { &[None] } else { select_ks };
    let mut grid = Vec::new();
    for &select_k in ks {
        for &model in &specs {
            grid.push(PipelineConfig {
                features,
                model,
                select_k,
                vocab,
            });
        }
    }
    grid
}
