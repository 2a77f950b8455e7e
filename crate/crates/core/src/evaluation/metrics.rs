use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Binary classification metrics with `post` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl EvalMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<Self> {
        let n = tp + fp + tn + fn_;
        if n == 0 {
            return Err(Error::invalid("no predictions to score"));
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Ok(EvalMetrics {
            accuracy: ratio(tp + tn, n),
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            r#fn: fn_,
        })
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }
}

pub fn confusion_and_metrics(y_true: &[Label], y_pred: &[Label]) -> Result<EvalMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t.is_post(), p.is_post()) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    EvalMetrics::from_counts(tp, fp, tn, fn_)
}

/// Arithmetic means of the headline metrics over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MeanMetrics {
    pub fn of(folds: &[EvalMetrics]) -> Self {
        let n = folds.len() as f64;
        let avg = |f: fn(&EvalMetrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
        MeanMetrics {
            accuracy: avg(|m| m.accuracy),
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            f1: avg(|m| m.f1),
        }
    }
}
