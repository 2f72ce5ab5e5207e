//! Brute-force oracle for the exact Wilcoxon branch.

use gcnshield_core::eval::{wilcoxon_signed_rank, WilcoxonMethod};
use gcnshield_core::Error;
use rand::Rng;

use super::rng;

/// Independent two-sided exact p-value: drop zeros, assign midranks by
/// counting, enumerate all 2ⁿ sign vectors.
pub fn enumeration_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| d.abs() > 1e-9).collect();
    let n = d.len();
    if n < 5 {
        return None;
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let ranks: Vec<f64> = d
        .iter()
        .map(|di| {
            let less = d.iter().filter(|dj| dj.abs() < di.abs() && !close(dj.abs(), di.abs())).count();
            let eq = d.iter().filter(|dj| close(dj.abs(), di.abs())).count();
            less as f64 + (eq as f64 + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let (mut lower, mut upper) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            lower += 1;
        }
        if w >= observed - 1e-9 {
            upper += 1;
        }
    }
    Some((2.0 * lower.min(upper) as f64 / (1u64 << n) as f64).min(1.0))
}

/// 200 random paired samples with n ≤ 12, on the 0.02 grid of 50-node
/// accuracies so ties and zero differences occur. Returns mismatches.
pub fn exact_branch_mismatches(seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let mut bad = Vec::new();
    for case in 0..200 {
        let n = r.random_range(5..=12);
        let x: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(10..40)) / 50.0).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(10..40)) / 50.0).collect();
        let got = wilcoxon_signed_rank(&x, &y);
        match (enumeration_oracle(&x, &y), got) {
            (Some(p), Ok(res)) if res.p_value == p && res.method == WilcoxonMethod::Exact => {}
            (None, Err(Error::InsufficientData(_))) => {}
            (want, got) => bad.push(format!("case {case}: oracle {want:?}, implementation {got:?}")),
        }
    }
    bad
}

