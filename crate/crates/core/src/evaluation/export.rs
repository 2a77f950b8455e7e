use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Label, UnitKind};
use crate::error::{Error, Result};
use crate::models::{predict_text, TrainedModel};
use crate::resources::TextResources;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub n: usize,
    pub predicted_post: usize,
    pub recall: f64,
}

/// Share of documents predicted post on a set known to be post-mortem only.
/// Documents explicitly labeled pre are rejected; unlabeled ones are taken
/// as positives.
pub fn recall_only_eval(model: &TrainedModel, docs: &[Document], resources: &TextResources) -> Result<RecallReport> {
    if docs.is_empty() {
        return Err(Error::invalid("recall-only evaluation needs at least one document"));
    }
    if let Some(d) = docs.iter().find(|d| d.label == Some(Label::Pre)) {
        return Err(Error::invalid(format!(
            "document {:?} is labeled pre; recall-only input must be post-mortem",
            d.source_id
        )));
    }
    let mut hits = 0;
    for d in docs {
        if predict_text(model, &d.text, resources)?.label.is_post() {
            hits += 1;
        }
    }
    Ok(RecallReport {
        n: docs.len(),
        predicted_post: hits,
        recall: hits as f64 / docs.len() as f64,
    })
}

/// Documents of a corpus asserted to be post-mortem. Every unit is labeled
/// post; a comment labeled pre, or a profile whose comments are all labeled
/// pre, is an error.
pub fn positive_documents(corpus: &Corpus, unit: UnitKind) -> Result<Vec<Document>> {
    let doc = |source_id: &str, text: String| Document {
        unit_kind: unit,
        source_id: source_id.to_string(),
        text,
        label: Some(Label::Post),
    };
    match unit {
        UnitKind::Comment => corpus
            .comments()
            .map(|c| {
                if c.label == Some(Label::Pre) {
                    return Err(Error::invalid(format!("comment {:?} is labeled pre", c.comment_id)));
                }
                Ok(doc(&c.comment_id, c.text.clone()))
            })
            .collect(),
        UnitKind::Profile => corpus
            .profiles
            .iter()
            .map(|p| {
                if !p.comments.is_empty() && p.comments.iter().all(|c| c.label == Some(Label::Pre)) {
                    return Err(Error::invalid(format!("profile {:?} has only pre-mortem comments", p.profile_id)));
                }
                Ok(doc(&p.profile_id, p.concatenated_text()))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisclassifiedRow {
    pub source_id: String,
    pub r#true: Label,
    pub predicted: Label,
    pub score: f64,
    pub text: String,
}

pub fn misclassified(model: &TrainedModel, docs: &[Document], resources: &TextResources) -> Result<Vec<MisclassifiedRow>> {
    let mut rows = Vec::new();
    for d in docs {
        let truth = d.label.ok_or_else(|| Error::Unlabeled(d.source_id.clone()))?;
        let p = predict_text(model, &d.text, resources)?;
        if p.label != truth {
            rows.push(MisclassifiedRow {
                source_id: d.source_id.clone(),
                r#true: truth,
                predicted: p.label,
                score: p.score,
                text: d.text.clone(),
            });
        }
    }
    Ok(rows)
}

/// Writes false positives and negatives as JSONL in document order and
/// returns how many rows were written.
pub fn export_misclassified(
    model: &TrainedModel,
    docs: &[Document],
    path: &Path,
    resources: &TextResources,
) -> Result<usize> {
    let rows = misclassified(model, docs, resources)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in &rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows.len())
}
