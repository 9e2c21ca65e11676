//! One-dimensional two-sample statistics: Mann-Whitney p-value, AUC-ROC and
//! AUC-PR.

use std::cmp::Ordering;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest combined sample size for which the exact null distribution of U
/// is used.
pub const EXACT_MW_MAX_N: usize = 20;

/// Mid-ranks (1-based, ties averaged) of `values`, plus the tie correction
/// term `Σ (t³ − t)` over tie groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share the mean of ranks i+1..=j
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Mann-Whitney U of `xs` against `ys`: the number of pairs with `x > y`,
/// ties counting one half.
pub fn mann_whitney_u(xs: &[f64], ys: &[f64]) -> Result<f64> {
    Ok(u_and_ties(xs, ys)?.0)
}

fn u_and_ties(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyGroupInput);
    }
    let joined: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let (ranks, ties) = average_ranks(&joined);
    let n1 = xs.len() as f64;
    let rank_sum: f64 = ranks[..xs.len()].iter().sum();
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0, ties))
}

/// Two-sided Mann-Whitney p-value.
///
/// Exact when `|xs| + |ys| <= 20` and there are no ties; otherwise the
/// normal approximation with tie and continuity corrections.
pub fn mann_whitney_p(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (u, ties) = u_and_ties(xs, ys)?;
    let (n1, n2) = (xs.len(), ys.len());
    if n1 + n2 <= EXACT_MW_MAX_N && ties == 0.0 {
        // without ties U is an integer
        return Ok(exact_two_sided_p(n1, n2, u.round() as usize));
    }
    Ok(normal_two_sided_p(u, n1, n2, ties))
}

/// Number of arrangements of `n1` + `n2` distinct values that yield each
/// possible U in `0..=n1*n2`.
pub fn u_distribution(n1: usize, n2: usize) -> Vec<u64> {
    // table[j][u]: arrangements of i x-values and j y-values with statistic u,
    // rolled over i
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<u64>> = (0..=n2)
        .map(|_| {
            let mut row = vec![0u64; max_u + 1];
            row[0] = 1;
            row
        })
        .collect();
    for _i in 1..=n1 {
        let mut cur: Vec<Vec<u64>> = vec![vec![0u64; max_u + 1]; n2 + 1];
        cur[0][0] = 1;
        for j in 1..=n2 {
            for u in 0..=max_u {
                // the largest value is either an x (beats all j ys) or a y
                let from_x = if u >= j { prev[j][u - j] } else { 0 };
                cur[j][u] = from_x + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(n2)
}

fn exact_two_sided_p(n1: usize, n2: usize, u: usize) -> f64 {
    let counts = u_distribution(n1, n2);
    let total: u64 = counts.iter().sum();
    let lower: u64 = counts[..=u].iter().sum();
    let upper: u64 = counts[u..].iter().sum();
    let tail = lower.min(upper);
    (2.0 * tail as f64 / total as f64).min(1.0)
}

fn normal_two_sided_p(u: f64, n1: usize, n2: usize, ties: f64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let mean = a * b / 2.0;
    let var = a * b / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Area under the ROC curve with `pos` as the positive class; equals
/// `U / (|pos| * |neg|)`.
pub fn auc_roc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    let u = mann_whitney_u(pos, neg)?;
    Ok(u / (pos.len() as f64 * neg.len() as f64))
}

/// Average precision of `pos` against `neg`, ranking by descending score.
/// Tied positives are ranked before tied negatives.
pub fn auc_pr(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyGroupInput);
    }
    let mut scored: Vec<(f64, bool)> =
        pos.iter().map(|&v| (v, true)).chain(neg.iter().map(|&v| (v, false))).collect();
    scored.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => b.1.cmp(&a.1),
        o => o,
    });
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &(_, is_pos)) in scored.iter().enumerate() {
        if is_pos {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / pos.len() as f64)
}
