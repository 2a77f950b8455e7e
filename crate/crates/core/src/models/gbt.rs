//! Gradient boosted regression trees on the logistic loss.
//!
//! Each round fits a depth-limited least-squares tree to the negative
//! gradient `y - p` using exact greedy splits (thresholds at midpoints of
//! adjacent distinct values), then sets every leaf to a Newton step
//! `sum(y - p) / sum(p (1 - p))` scaled by the learning rate. A leaf step is
//! halved until it does not increase that leaf's loss, so the training loss
//! never goes up from one round to the next.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::text::FeatureVector;

use super::check_training_set;
use super::logistic::{log1p_exp_neg, sigmoid};

const MIN_GAIN: f64 = 1e-12;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtSettings {
    pub depth: usize,
    pub rounds: usize,
    pub learning_rate: f64,
}

impl Default for GbtSettings {
    fn default() -> Self {
        GbtSettings {
            depth: 3,
            rounds: 100,
            learning_rate: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x.get(*feature) <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub dimension: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Mean training log-loss before the first round and after each round.
    pub training_loss: Vec<f64>,
}

impl GbtParams {
    /// Raw additive score (log-odds of post).
    pub fn decision(&self, x: &FeatureVector) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn probability(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.decision(x))
    }

    /// Total split gain per feature.
    pub fn gain_importance(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for t in &self.trees {
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    out[*feature] += gain;
                }
            }
        }
        out
    }
}

fn mean_log_loss(scores: &[f64], y: &[f64]) -> f64 {
    let s: f64 = scores
        .iter()
        .zip(y)
        .map(|(f, yi)| log1p_exp_neg((2.0 * yi - 1.0) * f))
        .sum();
    s / scores.len() as f64
}

/// Nonzero entries of one feature, ascending by value.
struct Column {
    entries: Vec<(f64, usize)>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone)]
struct NodeScan {
    g_left: f64,
    n_left: usize,
    last: Option<f64>,
    zero_done: bool,
    nnz: usize,
    g_nnz: f64,
}

struct Frontier {
    node: usize,
    rows: Vec<usize>,
    g_sum: f64,
}

fn better(best: &Option<Candidate>, gain: f64) -> bool {
    gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain)
}

pub fn train_gbt(vectors: &[FeatureVector], labels: &[Label], settings: &GbtSettings) -> Result<GbtParams> {
    if settings.depth < 1 {
        return Err(Error::invalid("tree depth must be at least 1"));
    }
    if settings.rounds < 1 {
        return Err(Error::invalid("boosting rounds must be at least 1"));
    }
    if !(settings.learning_rate > 0.0 && settings.learning_rate.is_finite()) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let dim = check_training_set(vectors, labels)?;
    let n = vectors.len();
    let y: Vec<f64> = labels.iter().map(|l| if l.is_post() { 1.0 } else { 0.0 }).collect();

    let mut columns: Vec<Column> = (0..dim).map(|_| Column { entries: Vec::new() }).collect();
    for (row, x) in vectors.iter().enumerate() {
        for &(i, v) in x.entries() {
            columns[i].entries.push((v, row));
        }
    }
    for c in &mut columns {
        c.entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }

    let n_post = y.iter().sum::<f64>();
    let base_score = (n_post / (n as f64 - n_post)).ln();
    let mut scores = vec![base_score; n];
    let mut training_loss = vec![mean_log_loss(&scores, &y)];
    let mut trees = Vec::with_capacity(settings.rounds);

    for _ in 0..settings.rounds {
        let p: Vec<f64> = scores.iter().map(|&f| sigmoid(f)).collect();
        let resid: Vec<f64> = y.iter().zip(&p).map(|(yi, pi)| yi - pi).collect();
        let tree = grow_tree(&columns, &resid, &p, &y, &scores, n, settings);
        for (row, x) in vectors.iter().enumerate() {
            scores[row] += tree.predict(x);
        }
        let loss = mean_log_loss(&scores, &y);
        if !loss.is_finite() {
            return Err(Error::NonFinite("boosting loss".into()));
        }
        training_loss.push(loss);
        trees.push(tree);
    }

    Ok(GbtParams {
        dimension: dim,
        base_score,
        trees,
        training_loss,
    })
}

fn grow_tree(
    columns: &[Column],
    resid: &[f64],
    p: &[f64],
    y: &[f64],
    scores: &[f64],
    n: usize,
    settings: &GbtSettings,
) -> Tree {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // node slot of each row within the current frontier, usize::MAX when settled
    let mut slot = vec![0usize; n];
    let mut frontier = vec![Frontier {
        node: 0,
        rows: (0..n).collect(),
        g_sum: resid.iter().sum(),
    }];
    let mut leaves: Vec<Frontier> = Vec::new();

    for _ in 0..settings.depth {
        if frontier.is_empty() {
            break;
        }
        let best = find_splits(columns, resid, &slot, &frontier);
        let mut next = Vec::new();
        for (k, f) in frontier.into_iter().enumerate() {
            let Some(cand) = &best[k] else {
                leaves.push(f);
                continue;
            };
            let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
            for &r in &f.rows {
                let v = value_of(columns, cand.feature, r);
                if v <= cand.threshold {
                    lrows.push(r);
                } else {
                    rrows.push(r);
                }
            }
            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[f.node] = Node::Split {
                feature: cand.feature,
                threshold: cand.threshold,
                left,
                right: left + 1,
                gain: cand.gain,
            };
            let lg = lrows.iter().map(|&r| resid[r]).sum();
            let rg = rrows.iter().map(|&r| resid[r]).sum();
            next.push(Frontier { node: left, rows: lrows, g_sum: lg });
            next.push(Frontier { node: left + 1, rows: rrows, g_sum: rg });
        }
        for (k, f) in next.iter().enumerate() {
            for &r in &f.rows {
                slot[r] = k;
            }
        }
        frontier = next;
    }
    leaves.extend(frontier);

    for leaf in leaves {
        let value = leaf_value(&leaf.rows, resid, p, y, scores, settings.learning_rate);
        nodes[leaf.node] = Node::Leaf { value };
    }
    Tree { nodes }
}

fn value_of(columns: &[Column], feature: usize, row: usize) -> f64 {
    // rows are few per split; a linear probe over the column is fine at desk scale
    columns[feature]
        .entries
        .iter()
        .find(|e| e.1 == row)
        .map_or(0.0, |e| e.0)
}

fn leaf_value(rows: &[usize], resid: &[f64], p: &[f64], y: &[f64], scores: &[f64], lr: f64) -> f64 {
    let g: f64 = rows.iter().map(|&r| resid[r]).sum();
    let h: f64 = rows.iter().map(|&r| p[r] * (1.0 - p[r])).sum();
    if g == 0.0 {
        return 0.0;
    }
    let loss = |delta: f64| -> f64 {
        rows.iter()
            .map(|&r| log1p_exp_neg((2.0 * y[r] - 1.0) * (scores[r] + delta)))
            .sum()
    };
    let base = loss(0.0);
    let mut step = lr * g / h.max(f64::MIN_POSITIVE);
    if !step.is_finite() {
        step = lr * g.signum() * 1e3;
    }
    for _ in 0..MAX_HALVINGS {
        if loss(step) <= base {
            return step;
        }
        step *= 0.5;
    }
    0.0
}

/// Best split per frontier node, scanning every column once.
fn find_splits(columns: &[Column], resid: &[f64], slot: &[usize], frontier: &[Frontier]) -> Vec<Option<Candidate>> {
    let in_frontier = |r: usize| slot[r] < frontier.len() && frontier[slot[r]].rows.binary_search(&r).is_ok();
    let mut best: Vec<Option<Candidate>> = (0..frontier.len()).map(|_| None).collect();
    let fresh = NodeScan {
        g_left: 0.0,
        n_left: 0,
        last: None,
        zero_done: false,
        nnz: 0,
        g_nnz: 0.0,
    };
    let mut state = vec![fresh.clone(); frontier.len()];

    for (feature, col) in columns.iter().enumerate() {
        state.fill(fresh.clone());
        for &(_, r) in &col.entries {
            if in_frontier(r) {
                let s = &mut state[slot[r]];
                s.nnz += 1;
                s.g_nnz += resid[r];
            }
        }
        let consider = |k: usize, s: &NodeScan, lo: f64, hi: f64, best: &mut Vec<Option<Candidate>>| {
            let f = &frontier[k];
            let n = f.rows.len();
            let n_right = n - s.n_left;
            if s.n_left == 0 || n_right == 0 {
                return;
            }
            let g_right = f.g_sum - s.g_left;
            let gain = s.g_left * s.g_left / s.n_left as f64 + g_right * g_right / n_right as f64
                - f.g_sum * f.g_sum / n as f64;
            if better(&best[k], gain) {
                best[k] = Some(Candidate {
                    gain,
                    feature,
                    threshold: 0.5 * (lo + hi),
                });
            }
        };
        for &(v, r) in &col.entries {
            if !in_frontier(r) {
                continue;
            }
            let k = slot[r];
            let zeros = frontier[k].rows.len() - state[k].nnz;
            if !state[k].zero_done && v > 0.0 {
                state[k].zero_done = true;
                if zeros > 0 {
                    if let Some(lv) = state[k].last {
                        let s = state[k].clone();
                        consider(k, &s, lv, 0.0, &mut best);
                    }
                    let s = &mut state[k];
                    s.g_left += frontier[k].g_sum - s.g_nnz;
                    s.n_left += zeros;
                    s.last = Some(0.0);
                }
            }
            if let Some(lv) = state[k].last {
                if v > lv {
                    let s = state[k].clone();
                    consider(k, &s, lv, v, &mut best);
                }
            }
            let s = &mut state[k];
            s.g_left += resid[r];
            s.n_left += 1;
            s.last = Some(v);
        }
        for k in 0..frontier.len() {
            let zeros = frontier[k].rows.len() - state[k].nnz;
            if !state[k].zero_done && zeros > 0 {
                if let Some(lv) = state[k].last {
                    let s = state[k].clone();
                    consider(k, &s, lv, 0.0, &mut best);
                }
            }
        }
    }
    best
}
