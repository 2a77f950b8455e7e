//! Paired t-test, Mann-Whitney U, Cohen's d and Holm-Bonferroni correction.
//! All p-values are two-sided.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Sample sizes up to this total use exact enumeration in Mann-Whitney.
pub const MWU_EXACT_MAX: usize = 12;

/// Tolerance when comparing enumerated U values against the observed one.
const U_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    PairedT,
    MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub df: Option<f64>,
    pub effect_size_d: Option<f64>,
    pub corrected_p: Option<f64>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} contains a non-finite value")));
    }
    Ok(())
}

/// `t = mean(d) / (sd(d) / sqrt(n))` on `d = a - b`, `df = n - 1`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<StatTestResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    check_finite(a, "sample a")?;
    check_finite(b, "sample b")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let sd = sample_variance(&d).sqrt();
    if sd <= 0.0 {
        return Err(Error::Degenerate("differences have zero variance".into()));
    }
    let t = mean(&d) / (sd / n.sqrt());
    let df = n - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(StatTestResult {
        kind: TestKind::PairedT,
        statistic: t,
        p_value: p,
        df: Some(df),
        effect_size_d: None,
        corrected_p: None,
    })
}

/// Midranks (1-based) of the pooled sample.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwuMethod {
    /// Exact for `n_a + n_b <= MWU_EXACT_MAX`, normal approximation above.
    Auto,
    Exact,
    Normal,
}

/// `U` of sample `a`: its rank sum minus `n_a (n_a + 1) / 2`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<StatTestResult> {
    mann_whitney_u_with(a, b, MwuMethod::Auto)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: MwuMethod) -> Result<StatTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Mann-Whitney needs two non-empty samples"));
    }
    check_finite(a, "sample a")?;
    check_finite(b, "sample b")?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let (na, nb) = (a.len(), b.len());
    let u = ranks[..na].iter().sum::<f64>() - (na * (na + 1)) as f64 / 2.0;
    let exact = match method {
        MwuMethod::Auto => na + nb <= MWU_EXACT_MAX,
        MwuMethod::Exact => {
            if na + nb > 24 {
                return Err(Error::invalid("exact Mann-Whitney is limited to 24 observations"));
            }
            true
        }
        MwuMethod::Normal => false,
    };
    let p = if exact {
        exact_p(&ranks, na, u)
    } else {
        normal_p(&ranks, na, nb, u)
    };
    Ok(StatTestResult {
        kind: TestKind::MannWhitney,
        statistic: u,
        p_value: p.clamp(0.0, 1.0),
        df: None,
        effect_size_d: None,
        corrected_p: None,
    })
}

/// Share of all `C(n, n_a)` assignments of the pooled midranks to sample `a`
/// whose U lies at least as far from its mean as the observed U.
fn exact_p(ranks: &[f64], na: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    let nb = n - na;
    let centre = (na * nb) as f64 / 2.0;
    let dev = (u_obs - centre).abs();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let r: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if ((r - offset) - centre).abs() >= dev - U_EPS {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Normal approximation with tie-corrected variance and continuity correction.
fn normal_p(ranks: &[f64], na: usize, nb: usize, u: f64) -> f64 {
    let n = (na + nb) as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let centre = (na * nb) as f64 / 2.0;
    let z = ((u - centre).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2)
}

/// `(mean_a - mean_b) / pooled_sd` with sample variances.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("Cohen's d needs at least two observations per sample"));
    }
    check_finite(a, "sample a")?;
    check_finite(b, "sample b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0)).sqrt();
    if pooled <= 0.0 {
        return Err(Error::Degenerate("pooled standard deviation is zero".into()));
    }
    Ok((mean(a) - mean(b)) / pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    /// Adjusted p-values in the input order.
    pub adjusted: Vec<f64>,
    /// Rejections in the input order.
    pub reject: Vec<bool>,
}

/// Step-down Holm adjustment: in ascending order of p,
/// `adj_(i) = max_{j <= i} (m - j + 1) p_(j)`, clamped to 1. Hypotheses are
/// rejected while the adjusted value stays within `alpha`.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Result<HolmResult> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]).then(i.cmp(&j)));
    let mut adjusted = vec![0.0; m];
    let mut reject = vec![false; m];
    let mut running = 0.0f64;
    let mut still_rejecting = true;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max((m - rank) as f64 * p_values[i]).min(1.0);
        adjusted[i] = running;
        still_rejecting &= running <= alpha;
        reject[i] = still_rejecting;
    }
    Ok(HolmResult { adjusted, reject })
}
