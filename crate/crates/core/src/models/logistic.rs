//! L2-regularized logistic regression trained with full-batch L-BFGS.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::text::FeatureVector;

use super::{check_training_set, LinearParams};

const HISTORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// `ln(1 + exp(-m))` without overflow.
pub(crate) fn log1p_exp_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `(1/n) sum_i ln(1 + exp(-y_i (w.x_i + b))) + (lambda/2) |w|^2`, with
/// `y = +1` for post and `-1` for pre. The bias is not regularized.
///
/// Parameters are laid out as `[w_0, ..., w_{D-1}, b]`.
pub struct LogisticObjective<'a> {
    vectors: &'a [FeatureVector],
    signs: Vec<f64>,
    lambda: f64,
    dim: usize,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(vectors: &'a [FeatureVector], labels: &[Label], lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        let dim = check_training_set(vectors, labels)?;
        Ok(LogisticObjective {
            vectors,
            signs: labels.iter().map(|l| l.sign()).collect(),
            lambda,
            dim,
        })
    }

    pub fn n_params(&self) -> usize {
        self.dim + 1
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let (w, b) = params.split_at(self.dim);
        let n = self.vectors.len() as f64;
        let data: f64 = self
            .vectors
            .iter()
            .zip(&self.signs)
            .map(|(x, y)| log1p_exp_neg(y * (x.dot(w) + b[0])))
            .sum();
        data / n + 0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let (w, b) = params.split_at(self.dim);
        let n = self.vectors.len() as f64;
        let mut grad = vec![0.0; self.dim + 1];
        let mut loss = 0.0;
        for (x, y) in self.vectors.iter().zip(&self.signs) {
            let m = y * (x.dot(w) + b[0]);
            loss += log1p_exp_neg(m);
            // d/dz ln(1 + exp(-y z)) = -y * sigmoid(-m)
            let coef = -y * sigmoid(-m) / n;
            for &(i, v) in x.entries() {
                grad[i] += coef * v;
            }
            grad[self.dim] += coef;
        }
        let mut reg = 0.0;
        for (g, wi) in grad.iter_mut().zip(w) {
            *g += self.lambda * wi;
            reg += wi * wi;
        }
        (loss / n + 0.5 * self.lambda * reg, grad)
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        self.value_and_gradient(params).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticSettings {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticSettings {
    fn default() -> Self {
        LogisticSettings {
            lambda: 1e-3,
            tol: 1e-6,
            max_iter: 5000,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes the logistic objective from the origin with L-BFGS and an
/// Armijo backtracking line search. Stops when the gradient max-norm drops to
/// `tol` (converged) or after `max_iter` iterations or a failed line search.
pub fn train_lr(vectors: &[FeatureVector], labels: &[Label], settings: &LogisticSettings) -> Result<LinearParams> {
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(Error::invalid("tol must be positive"));
    }
    let obj = LogisticObjective::new(vectors, labels, settings.lambda)?;
    let mut x = vec![0.0; obj.n_params()];
    let (mut f, mut g) = obj.value_and_gradient(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iter {
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("logistic loss at iteration {iterations}")));
        }
        if max_abs(&g) <= settings.tol {
            converged = true;
            break;
        }
        iterations += 1;

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            for di in &mut d {
                *di *= gamma;
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - beta) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        let mut step = if history.is_empty() { 1.0 / max_abs(&g).max(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = obj.value_and_gradient(&trial);
            if ft.is_finite() && ft <= f + ARMIJO * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else { break };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 {
            if history.len() == HISTORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gn;
    }
    if !converged && max_abs(&g) <= settings.tol {
        converged = true;
    }

    let bias = x.pop().expect("bias parameter");
    Ok(LinearParams {
        weights: x,
        bias,
        iterations,
        converged,
        final_violation: max_abs(&g),
    })
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
    fn separable_signs() {
        let (xs, ys) = separable();
        let m = train_lr(&xs, &ys, &LogisticSettings { lambda: 0.1, ..Default::default() }).unwrap();
        assert!(m.converged);
        assert!(m.weights[0] > 0.0 && m.weights[1] < 0.0);
        assert!(m.final_violation <= 1e-6);
        let obj = LogisticObjective::new(&xs, &ys, 0.1).unwrap();
        let mut p = m.weights.clone();
        p.push(m.bias);
        assert!(max_abs(&obj.gradient(&p)) <= 1e-6);
    }

    #[test]
    fn heavy_regularization_shrinks_to_prior() {
        let (mut xs, mut ys) = separable();
        xs.push(FeatureVector::from_dense(&[1.0, 0.0]).unwrap());
        ys.push(Label::Post);
        let m = train_lr(&xs, &ys, &LogisticSettings { lambda: 1e6, ..Default::default() }).unwrap();
        let norm = m.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm < 1e-3);
        // majority class is post
        assert!(m.bias > 0.0);
        for x in &xs {
            assert!(m.margin(x) > 0.0);
        }
    }

    #[test]
    fn stable_log_terms() {
        assert!((log1p_exp_neg(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(log1p_exp_neg(800.0) >= 0.0);
        assert!((log1p_exp_neg(-800.0) - 800.0).abs() < 1e-9);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
