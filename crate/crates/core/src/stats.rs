//! Rank-based tests: Kruskal-Wallis, two-sided Mann-Whitney U, Bonferroni
//! correction and pairwise significance counting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Largest combined sample size for which tie-free MWU uses the exact null.
pub const EXACT_MWU_MAX_N: usize = 12;

/// Default family-wise significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Social,
    Economic,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Social => "social",
            Axis::Economic => "economic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KwResult {
    pub h: f64,
    pub p: f64,
    pub df: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    pub u: f64,
    pub p_two_sided: f64,
    pub method: MwuMethod,
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("statistics need finite values".into()));
    }
    Ok(())
}

/// 1-based ranks with ties sharing their average rank, plus tie-group sizes.
pub fn ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            out[k] = avg;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (out, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Kruskal-Wallis H with tie correction; p from the chi-square upper tail.
pub fn kruskal_wallis<G: AsRef<[f64]>>(groups: &[G]) -> Result<KwResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("Kruskal-Wallis needs at least two groups".into()));
    }
    let mut all = Vec::new();
    for g in groups {
        let g = g.as_ref();
        if g.is_empty() {
            return Err(Error::EmptyInput("Kruskal-Wallis group"));
        }
        check_finite(g)?;
        all.extend_from_slice(g);
    }
    let n = all.len() as f64;
    let df = groups.len() - 1;
    let (r, ties) = ranks(&all);
    let correction = 1.0 - tie_sum(&ties) / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KwResult { h: 0.0, p: 1.0, df });
    }
    // Deviation form: exactly zero when every group has the mean rank.
    let grand = (n + 1.0) / 2.0;
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let len = g.as_ref().len();
        let mean_rank = r[offset..offset + len].iter().sum::<f64>() / len as f64;
        sum += len as f64 * (mean_rank - grand) * (mean_rank - grand);
        offset += len;
    }
    let h = 12.0 / (n * (n + 1.0)) * sum / correction;
    let chi = ChiSquared::new(df as f64).expect("df is positive");
    Ok(KwResult { h, p: chi.sf(h).clamp(0.0, 1.0), df })
}

/// Number of arrangements of `n` + `m` tie-free values giving each `U_a`.
fn mwu_null_counts(n: usize, m: usize) -> Vec<u64> {
    // f[i][j][u]: arrangements of i a-values and j b-values with U_a = u.
    let mut f = vec![vec![Vec::<u64>::new(); m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            let mut row = vec![0u64; i * j + 1];
            if i == 0 || j == 0 {
                row[0] = 1;
            } else {
                // Largest value from a: it beats all j b-values.
                for (u, c) in f[i - 1][j].iter().enumerate() {
                    row[u + j] += c;
                }
                for (u, c) in f[i][j - 1].iter().enumerate() {
                    row[u] += c;
                }
            }
            f[i][j] = row;
        }
    }
    std::mem::take(&mut f[n][m])
}

/// Two-sided Mann-Whitney U with `U = min(U_a, U_b)`.
///
/// Exact null enumeration for tie-free samples with `n + m <=`
/// [`EXACT_MWU_MAX_N`]; tie-corrected normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MwuResult> {
    check_samples(a, b)?;
    let tie_free = ranks(&[a, b].concat()).1.is_empty();
    let method = if tie_free && a.len() + b.len() <= EXACT_MWU_MAX_N { MwuMethod::Exact } else { MwuMethod::NormalApprox };
    mann_whitney_u_using(a, b, method)
}

/// Largest `n + m` whose arrangement counts fit in `u64`.
const EXACT_COUNT_LIMIT: usize = 60;

/// Mann-Whitney U with a forced p-value method.
///
/// The exact method rejects tied samples and `n + m` above 60.
pub fn mann_whitney_u_using(a: &[f64], b: &[f64], method: MwuMethod) -> Result<MwuResult> {
    check_samples(a, b)?;
    let (n, m) = (a.len(), b.len());
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let (r, ties) = ranks(&all);
    let ra: f64 = r[..n].iter().sum();
    let ua = ra - (n * (n + 1)) as f64 / 2.0;
    let ub = (n * m) as f64 - ua;
    let u = ua.min(ub);

    if method == MwuMethod::Exact {
        if !ties.is_empty() || n + m > EXACT_COUNT_LIMIT {
            return Err(Error::InvalidArgument("exact Mann-Whitney needs tie-free samples with n + m <= 60".into()));
        }
        let counts = mwu_null_counts(n, m);
        let total: u64 = counts.iter().sum();
        let below: u64 = counts.iter().take(u.round() as usize + 1).sum();
        let p = (2.0 * below as f64 / total as f64).min(1.0);
        return Ok(MwuResult { u, p_two_sided: p, method });
    }

    let (nf, mf) = (n as f64, m as f64);
    let big_n = nf + mf;
    let mean = nf * mf / 2.0;
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_sum(&ties) / (big_n * (big_n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((mean - u).abs() - 0.5).max(0.0) / var.sqrt();
        statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MwuResult { u, p_two_sided: p, method })
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("Mann-Whitney sample"));
    }
    check_finite(a)?;
    check_finite(b)
}

/// `min(1, m · p_i)` for a family of `m` p-values.
pub fn bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p_values.len() as f64;
    Ok(p_values.iter().map(|p| (p * m).min(1.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub a: String,
    pub b: String,
    pub test: MwuResult,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub alpha_level: f64,
    /// Every pair in lexicographic order.
    pub pairs: Vec<PairResult>,
    pub n_significant: usize,
}

/// MWU on every pair of groups, Bonferroni-adjusted over the family.
pub fn pairwise_report(groups: &BTreeMap<String, Vec<f64>>, alpha_level: f64) -> Result<PairwiseReport> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("pairwise comparison needs at least two groups".into()));
    }
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha level {alpha_level} outside (0, 1)")));
    }
    let keys: Vec<&String> = groups.keys().collect();
    let mut raw = Vec::new();
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i + 1..] {
            raw.push(((*a).clone(), (*b).clone(), mann_whitney_u(&groups[*a], &groups[*b])?));
        }
    }
    let adjusted = bonferroni(&raw.iter().map(|r| r.2.p_two_sided).collect::<Vec<_>>())?;
    let pairs: Vec<PairResult> = raw
        .into_iter()
        .zip(adjusted)
        .map(|((a, b, test), p_adjusted)| PairResult { a, b, test, p_adjusted, significant: p_adjusted < alpha_level })
        .collect();
    let n_significant = pairs.iter().filter(|p| p.significant).count();
    Ok(PairwiseReport { alpha_level, pairs, n_significant })
}

/// Kruskal-Wallis plus pairwise tests for one axis; both absent below two groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisAnalysis {
    pub axis: Axis,
    pub kruskal_wallis: Option<KwResult>,
    pub pairwise: Option<PairwiseReport>,
}

pub fn analyze_axis(axis: Axis, groups: &BTreeMap<String, Vec<f64>>, alpha_level: f64) -> Result<AxisAnalysis> {
    if groups.values().any(Vec::is_empty) {
        return Err(Error::EmptyInput("group of scores"));
    }
    if groups.len() < 2 {
        return Ok(AxisAnalysis { axis, kruskal_wallis: None, pairwise: None });
    }
    let vals: Vec<&Vec<f64>> = groups.values().collect();
    Ok(AxisAnalysis {
        axis,
        kruskal_wallis: Some(kruskal_wallis(&vals)?),
        pairwise: Some(pairwise_report(groups, alpha_level)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_ranks() {
        let (r, ties) = ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, [3.5, 1.0, 3.5, 2.0]);
        assert_eq!(ties, [2]);
    }

    #[test]
    fn mwu_small_cases() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, MwuMethod::Exact);
        assert!((r.p_two_sided - 1.0 / 3.0).abs() < 1e-12);
        let t = mann_whitney_u(&[5.0], &[5.0]).unwrap();
        assert_eq!((t.u, t.p_two_sided), (0.5, 1.0));
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn null_counts_sum_to_binomial() {
        let c = mwu_null_counts(3, 4);
        assert_eq!(c.iter().sum::<u64>(), 35);
        assert_eq!(c.len(), 13);
        assert_eq!(c, c.iter().rev().copied().collect::<Vec<_>>());
    }

    #[test]
    fn kw_identical_groups() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(r.h.abs() < 1e-12);
        assert!((r.p - 1.0).abs() < 1e-12);
        let all_tied = kruskal_wallis(&[vec![2.0, 2.0], vec![2.0]]).unwrap();
        assert_eq!((all_tied.h, all_tied.p), (0.0, 1.0));
        assert!(kruskal_wallis(&[vec![1.0]]).is_err());
    }

    #[test]
    fn bonferroni_cases() {
        assert_eq!(bonferroni(&[0.01]).unwrap(), [0.01]);
        let adj = bonferroni(&[0.01, 0.3, 0.5, 0.5, 0.5]).unwrap();
        assert!((adj[0] - 0.05).abs() < 1e-15);
        assert_eq!(adj[1], 1.0);
        assert!(bonferroni(&[1.2]).is_err());
    }
}
