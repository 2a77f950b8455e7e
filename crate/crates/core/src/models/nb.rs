//! Multinomial naive Bayes over non-negative (possibly fractional) features.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::text::FeatureVector;

use super::check_training_set;

/// Index 0 is `pre`, index 1 is `post`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    pub class_log_prior: [f64; 2],
    pub feature_log_prob: [Vec<f64>; 2],
}

/// Priors are class frequencies; feature likelihoods are
/// `(sum of values in class + alpha) / (sum of all values in class + alpha * D)`.
pub fn train_nb(vectors: &[FeatureVector], labels: &[Label], alpha: f64) -> Result<NaiveBayesParams> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let dim = check_training_set(vectors, labels)?;
    let mut counts = [vec![0.0; dim], vec![0.0; dim]];
    let mut n_class = [0usize; 2];
    for (x, l) in vectors.iter().zip(labels) {
        let c = l.is_post() as usize;
        n_class[c] += 1;
        for &(i, v) in x.entries() {
            counts[c][i] += v;
        }
    }
    let n = labels.len() as f64;
    let class_log_prior = [(n_class[0] as f64 / n).ln(), (n_class[1] as f64 / n).ln()];
    let feature_log_prob = counts.map(|row| {
        let denom = (row.iter().sum::<f64>() + alpha * dim as f64).ln();
        row.iter().map(|c| (c + alpha).ln() - denom).collect()
    });
    Ok(NaiveBayesParams {
        class_log_prior,
        feature_log_prob,
    })
}

impl NaiveBayesParams {
    pub fn dimension(&self) -> usize {
        self.feature_log_prob[0].len()
    }

    pub fn joint_log_likelihood(&self, x: &FeatureVector) -> [f64; 2] {
        [0, 1].map(|c| self.class_log_prior[c] + x.dot(&self.feature_log_prob[c]))
    }

    /// Posterior probability of `post`.
    pub fn posterior_post(&self, x: &FeatureVector) -> f64 {
        let [pre, post] = self.joint_log_likelihood(x);
        1.0 / (1.0 + (pre - post).exp())
    }

    /// `ln(theta_post / theta_pre)` per dimension.
    pub fn log_ratios(&self) -> Vec<f64> {
        self.feature_log_prob[1]
            .iter()
            .zip(&self.feature_log_prob[0])
            .map(|(p, q)| p - q)
            .collect()
    }
}
