//! Accuracy, summary statistics and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Fraction of `subset` whose prediction matches the label.
/// `predictions[i]` is the prediction for `subset[i]`.
pub fn accuracy(predictions: &[usize], labels: &LabelVector, subset: &[NodeId]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::UndefinedMetric("accuracy over an empty node set".into()));
    }
    if predictions.len() != subset.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} nodes",
            predictions.len(),
            subset.len()
        )));
    }
    let correct = subset
        .iter()
        .zip(predictions)
        .filter(|(&v, &p)| labels.get(v) == p)
        .count();
    Ok(correct as f64 / subset.len() as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation with divisor `n`.
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Smallest number of nonzero differences the test accepts.
pub const WILCOXON_MIN_PAIRS: usize = 5;
/// Largest sample size handled by exact enumeration of the null distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Nonzero differences used.
    pub n: usize,
    /// Sum of ranks of the positive differences `x − y`.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Absolute differences closer than this (relative to their magnitude) share a rank.
const TIE_TOLERANCE: f64 = 1e-9;

/// Nonzero differences `x − y` and their doubled midranks (integers, so
/// sums of ranks can be enumerated exactly).
pub fn signed_doubled_ranks(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<u64>)> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "paired samples have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| d.abs() > TIE_TOLERANCE * 1f64.max(d.abs()))
        .collect();
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![0u64; diffs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        let anchor = diffs[order[start]].abs();
        while end < order.len() && diffs[order[end]].abs() - anchor <= TIE_TOLERANCE * anchor.max(1.0) {
            end += 1;
        }
        // ranks start..end (1-based start+1 ..= end); doubled midrank = start + 1 + end
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        start = end;
    }
    Ok((diffs, ranks))
}

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; `n ≤ 25` uses the exact null distribution, larger samples
/// the normal approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    let (diffs, ranks) = signed_doubled_ranks(x, y)?;
    let n = diffs.len();
    if n < WILCOXON_MIN_PAIRS {
        return Err(Error::InsufficientData(format!(
            "{n} nonzero differences, at least {WILCOXON_MIN_PAIRS} needed"
        )));
    }
    let w2: u64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let statistic = w2 as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX {
        let counts = doubled_rank_sum_counts(&ranks);
        let lower: u64 = counts[..=w2 as usize].iter().sum();
        let upper: u64 = counts[w2 as usize..].iter().sum();
        let p_value = exact_two_sided(lower, upper, n);
        return Ok(WilcoxonResult {
            n,
            statistic,
            p_value,
            method: WilcoxonMethod::Exact,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(WilcoxonResult {
        n,
        statistic,
        p_value: erfc(z / std::f64::consts::SQRT_2).min(1.0),
        method: WilcoxonMethod::Normal,
    })
}

/// `2 · min(lower, upper) / 2ⁿ`, capped at 1.
pub fn exact_two_sided(lower: u64, upper: u64, n: usize) -> f64 {
    let total = (1u64 << n) as f64;
    (2.0 * lower.min(upper) as f64 / total).min(1.0)
}

/// `counts[s]` = number of sign assignments whose positive doubled ranks sum to `s`.
fn doubled_rank_sum_counts(ranks: &[u64]) -> Vec<u64> {
    let max: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; max as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let labels = LabelVector::new(vec![0, 1, 1, 0], 2).unwrap();
        assert_eq!(accuracy(&[0, 1], &labels, &[0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &labels, &[0, 1]).unwrap(), 0.0);
        assert!(matches!(accuracy(&[], &labels, &[]), Err(Error::UndefinedMetric(_))));

        let labels = LabelVector::new(vec![0; 50], 2).unwrap();
        let subset: Vec<_> = (0..50).collect();
        let preds: Vec<_> = (0..50).map(|i| usize::from(i >= 37)).collect();
        assert_eq!(accuracy(&preds, &labels, &subset).unwrap(), 0.74);
    }

    #[test]
    fn six_positive_pairs() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [0.0; 6];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.method, WilcoxonMethod::Exact);
        assert_eq!(r.statistic, 21.0);
        assert_eq!(r.p_value, 0.03125);
    }

    #[test]
    fn equal_samples_are_insufficient() {
        let x = [0.5, 0.6, 0.7, 0.1, 0.2, 0.3];
        assert!(matches!(
            wilcoxon_signed_rank(&x, &x),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn swapping_samples_keeps_p() {
        let x = [0.52, 0.48, 0.6, 0.58, 0.44, 0.5, 0.66, 0.4];
        let y = [0.5, 0.5, 0.52, 0.5, 0.46, 0.42, 0.54, 0.42];
        let a = wilcoxon_signed_rank(&x, &y).unwrap();
        let b = wilcoxon_signed_rank(&y, &x).unwrap();
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn ties_share_midranks() {
        let (_, ranks) = signed_doubled_ranks(&[0.3, -0.1, 0.1, 0.2], &[0.0; 4]).unwrap();
        // |d| = 0.3, 0.1, 0.1, 0.2 → ranks 4, 1.5, 1.5, 3
        assert_eq!(ranks, vec![8, 3, 3, 6]);
    }

    #[test]
    fn normal_branch_for_large_samples() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64) * 0.01 + 0.1).collect();
        let y: Vec<f64> = (0..40).map(|i| if i % 3 == 0 { 0.5 } else { 0.05 }).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.method, WilcoxonMethod::Normal);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn population_std_of_constants_is_zero() {
        assert_eq!(population_std(&[0.4, 0.4]), 0.0);
        assert!((population_std(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
