//! Linear SVM (hinge loss, L2 regularization) solved by dual coordinate
//! descent.
//!
//! The bias is handled by appending a constant feature of 1 to every
//! example, so it is regularized together with the weights:
//!
//! primal: `1/2 (|w|^2 + b^2) + C sum_i max(0, 1 - y_i (w.x_i + b))`
//!
//! dual:   `max sum_i a_i - 1/2 |sum_i a_i y_i [x_i, 1]|^2`, `0 <= a_i <= C`

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::text::FeatureVector;

use super::{check_training_set, LinearParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmSettings {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmSettings {
    fn default() -> Self {
        SvmSettings {
            c: 1.0,
            tol: 1e-8,
            max_iter: 20_000,
        }
    }
}

/// Converged solver state, kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution {
    pub params: LinearParams,
    pub alphas: Vec<f64>,
}

impl SvmSolution {
    pub fn primal_objective(&self, vectors: &[FeatureVector], labels: &[Label], c: f64) -> f64 {
        primal_objective(&self.params, vectors, labels, c)
    }

    pub fn dual_objective(&self, vectors: &[FeatureVector], labels: &[Label]) -> f64 {
        dual_objective(&self.alphas, vectors, labels)
    }
}

pub fn primal_objective(p: &LinearParams, vectors: &[FeatureVector], labels: &[Label], c: f64) -> f64 {
    let reg = p.weights.iter().map(|w| w * w).sum::<f64>() + p.bias * p.bias;
    let hinge: f64 = vectors
        .iter()
        .zip(labels)
        .map(|(x, l)| (1.0 - l.sign() * p.margin(x)).max(0.0))
        .sum();
    0.5 * reg + c * hinge
}

pub fn dual_objective(alphas: &[f64], vectors: &[FeatureVector], labels: &[Label]) -> f64 {
    let dim = vectors.first().map_or(0, FeatureVector::dimension);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for ((x, l), a) in vectors.iter().zip(labels).zip(alphas) {
        for &(i, v) in x.entries() {
            w[i] += a * l.sign() * v;
        }
        b += a * l.sign();
    }
    let norm2 = w.iter().map(|v| v * v).sum::<f64>() + b * b;
    alphas.iter().sum::<f64>() - 0.5 * norm2
}

/// Sweeps the active examples in a fixed order, updating one dual variable at
/// a time with its clipped Newton step. Variables stuck at a bound with a
/// gradient beyond the previous sweep's extremes are shrunk out of the active
/// set; once the active set satisfies `tol`, a full sweep over every example
/// confirms convergence (max projected-gradient magnitude <= `tol`) or
/// reactivates everything.
pub fn solve_svm_dual(vectors: &[FeatureVector], labels: &[Label], settings: &SvmSettings) -> Result<SvmSolution> {
    let c = settings.c;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    let dim = check_training_set(vectors, labels)?;
    let n = vectors.len();
    let signs: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let q_diag: Vec<f64> = vectors.iter().map(|x| x.squared_norm() + 1.0).collect();
    let mut alphas = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let mut converged = false;

    let mut active: Vec<usize> = (0..n).collect();
    let mut active_size = n;
    let (mut pg_max_old, mut pg_min_old) = (f64::INFINITY, f64::NEG_INFINITY);

    while iterations < settings.max_iter {
        iterations += 1;
        let full = active_size == n;
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        violation = 0.0;
        let mut s = 0;
        while s < active_size {
            let i = active[s];
            let x = &vectors[i];
            let y = signs[i];
            let grad = y * (x.dot(&w) + b) - 1.0;
            let pg = if alphas[i] <= 0.0 {
                if grad > pg_max_old {
                    active_size -= 1;
                    active.swap(s, active_size);
                    continue;
                }
                grad.min(0.0)
            } else if alphas[i] >= c {
                if grad < pg_min_old {
                    active_size -= 1;
                    active.swap(s, active_size);
                    continue;
                }
                grad.max(0.0)
            } else {
                grad
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            violation = violation.max(pg.abs());
            if pg != 0.0 {
                let old = alphas[i];
                let new = (old - grad / q_diag[i]).clamp(0.0, c);
                let delta = (new - old) * y;
                if delta != 0.0 {
                    for &(j, v) in x.entries() {
                        w[j] += delta * v;
                    }
                    b += delta;
                }
                alphas[i] = new;
            }
            s += 1;
        }
        if !violation.is_finite() {
            return Err(Error::NonFinite("svm dual gradient".into()));
        }
        if violation <= settings.tol {
            if full && active_size == n {
                converged = true;
                break;
            }
            // confirm on every example
            active_size = n;
            active.sort_unstable();
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        pg_min_old = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
    }

    Ok(SvmSolution {
        params: LinearParams {
            weights: w,
            bias: b,
            iterations,
            converged,
            final_violation: violation,
        },
        alphas,
    })
}

pub fn train_svm(vectors: &[FeatureVector], labels: &[Label], settings: &SvmSettings) -> Result<LinearParams> {
    Ok(solve_svm_dual(vectors, labels, settings)?.params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<FeatureVector>, Vec<Label>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..3 {
            xs.push(FeatureVector::from_dense(&[1.0, 0.0]).unwrap());
            ys.push(Label::Post);
            xs.push(FeatureVector::from_dense(&[0.0, 1.0]).unwrap());
            ys.push(Label::Pre);
        }
        (xs, ys)
    }

    #[test]
    fn separable_toy() {
        let (xs, ys) = separable();
        let s = solve_svm_dual(&xs, &ys, &SvmSettings::default()).unwrap();
        assert!(s.params.converged);
        assert!(s.params.weights[0] > 0.0 && s.params.weights[1] < 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(s.params.margin(x) >= 0.0, y.is_post());
        }
        for a in &s.alphas {
            assert!(*a >= -1e-9 && *a <= 1.0 + 1e-9);
        }
        let gap = s.primal_objective(&xs, &ys, 1.0) - s.dual_objective(&xs, &ys);
        assert!(gap.abs() < 1e-6, "{gap}");
    }

    #[test]
    fn small_c_shrinks_weights() {
        let (xs, ys) = separable();
        let big = train_svm(&xs, &ys, &SvmSettings { c: 1.0, ..Default::default() }).unwrap();
        let small = train_svm(&xs, &ys, &SvmSettings { c: 1e-4, ..Default::default() }).unwrap();
        let norm = |p: &LinearParams| p.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm(&small) < 1e-3);
        assert!(norm(&small) < norm(&big));
    }

    #[test]
    fn rejects_bad_c() {
        let (xs, ys) = separable();
        assert!(train_svm(&xs, &ys, &SvmSettings { c: 0.0, ..Default::default() }).is_err());
    }
}
