//! Rank tables, Wilcoxon signed-rank tests and Holm's step-down correction.

use statrs::distribution::{ContinuousCDF, Normal};

/// Average ranks (1-based). `higher_is_better` gives the largest value rank 1.
pub fn average_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = values[a].total_cmp(&values[b]);
        if higher_is_better {
            o.reverse()
        } else {
            o
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    /// `ranks[d][p]`: rank of policy `p` on dataset `d`.
    pub ranks: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

/// Ranks policies per dataset. `values[p][d]` is policy `p` on dataset `d`.
pub fn rank_table(values: &[Vec<f64>], higher_is_better: bool) -> RankTable {
    let policies = values.len();
    let datasets = values.first().map_or(0, Vec::len);
    let ranks: Vec<Vec<f64>> = (0..datasets)
        .map(|d| {
            average_ranks(
                &values.iter().map(|row| row[d]).collect::<Vec<_>>(),
                higher_is_better,
            )
        })
        .collect();
    let mean = (0..policies)
        .map(|p| {
            if datasets == 0 {
                f64::NAN
            } else {
                ranks.iter().map(|r| r[p]).sum::<f64>() / datasets as f64
            }
        })
        .collect();
    RankTable { ranks, mean }
}

/// Exact-distribution cutoff for the signed-rank test.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Two-sided Wilcoxon signed-rank p-value for paired samples. Zero
/// differences are dropped; tied magnitudes get average ranks.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|v| *v != 0.0)
        .collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs, false);
    // doubled ranks are integers even with ties
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let w_plus: usize = doubled
        .iter()
        .zip(&d)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, _)| *r)
        .sum();

    if n <= WILCOXON_EXACT_MAX {
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let all = 2f64.powi(n as i32);
        let lower: f64 = counts[..=w_plus].iter().sum::<f64>() / all;
        let upper: f64 = counts[w_plus..].iter().sum::<f64>() / all;
        return (2.0 * lower.min(upper)).min(1.0);
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        var -= (t * t * t - t) / 48.0;
        i = j;
    }
    if var <= 0.0 {
        return 1.0;
    }
    let w = w_plus as f64 / 2.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolmResult {
    pub rejected: Vec<bool>,
    pub adjusted: Vec<f64>,
}

/// Holm's step-down procedure: the i-th smallest p (0-based) is compared
/// against `alpha / (m - i)`; testing stops at the first non-rejection.
pub fn holm(p_values: &[f64], alpha: f64) -> HolmResult {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut rejected = vec![false; m];
    let mut adjusted = vec![0.0; m];
    let mut still_rejecting = true;
    let mut running_max: f64 = 0.0;
    for (i, &k) in order.iter().enumerate() {
        let factor = (m - i) as f64;
        still_rejecting &= p_values[k] <= alpha / factor;
        rejected[k] = still_rejecting;
        running_max = running_max.max((factor * p_values[k]).min(1.0));
        adjusted[k] = running_max;
    }
    HolmResult { rejected, adjusted }
}

/// Pairwise Wilcoxon tests between policies with a Holm correction over
/// all `P(P-1)/2` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTests {
    pub labels: Vec<String>,
    pub p_values: Vec<Vec<f64>>,
    pub adjusted: Vec<Vec<f64>>,
    pub significant: Vec<Vec<bool>>,
}

/// `samples[p]` holds policy `p`'s paired observations (same dataset/seed order).
pub fn wilcoxon_holm(labels: &[String], samples: &[Vec<f64>], alpha: f64) -> PairwiseTests {
    let p = samples.len();
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect();
    let raw: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| wilcoxon_signed_rank(&samples[i], &samples[j]))
        .collect();
    let h = holm(&raw, alpha);
    let mut p_values = vec![vec![1.0; p]; p];
    let mut adjusted = vec![vec![1.0; p]; p];
    let mut significant = vec![vec![false; p]; p];
    for (n, &(i, j)) in pairs.iter().enumerate() {
        for (a, b) in [(i, j), (j, i)] {
            p_values[a][b] = raw[n];
            adjusted[a][b] = h.adjusted[n];
            significant[a][b] = h.rejected[n];
        }
    }
    PairwiseTests {
        labels: labels.to_vec(),
        p_values,
        adjusted,
        significant,
    }
}
