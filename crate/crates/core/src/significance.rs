//! Label-permutation null model and Benjamini-Hochberg adjustment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Better, Grouping, IndexId, LabeledPointCloud};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModelSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index_id: Option<IndexId>,
    #[serde(with = "crate::serde_f64")]
    pub observed: f64,
    #[serde(with = "crate::serde_f64")]
    pub null_mean: f64,
    #[serde(with = "crate::serde_f64")]
    pub null_se: f64,
    /// Fraction of replicates at least as good as the observed value.
    pub p_value: f64,
    /// `(count + 1) / (R + 1)`, never zero.
    pub p_conservative: f64,
    pub replicates: usize,
    pub seed: u64,
}

/// Random generator for replicate `replicate` of a run keyed by `seed`.
///
/// ChaCha's stream id carries the replicate number, so every replicate has
/// its own sequence no matter which thread evaluates it or in which order.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Uniformly shuffled copy of a grouping; group sizes are preserved.
pub fn permuted_grouping(grouping: &Grouping, seed: u64, replicate: usize) -> Grouping {
    let mut assignment = grouping.assignment().to_vec();
    assignment.shuffle(&mut replicate_rng(seed, replicate));
    grouping.relabeled(assignment)
}

/// Scores `index_fn` on the cloud's true grouping and on `replicates`
/// uniformly shuffled label assignments with the points held fixed.
///
/// An infinite index value compares as maximal.
pub fn permutation_null<F>(
    cloud: &LabeledPointCloud,
    better: Better,
    replicates: usize,
    seed: u64,
    index_fn: F,
) -> Result<NullModelSummary>
where
    F: Fn(&Grouping) -> Result<f64> + Sync,
{
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one null replicate".into()));
    }
    let base = cloud.grouping();
    let observed = index_fn(base)?;
    let null: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| index_fn(&permuted_grouping(base, seed, r)))
        .collect::<Result<_>>()?;
    Ok(summarize(observed, &null, better, seed))
}

/// Aggregates replicate values in index order.
pub fn summarize(observed: f64, null: &[f64], better: Better, seed: u64) -> NullModelSummary {
    let r = null.len();
    let count = null.iter().filter(|&&v| better.at_least_as_good(v, observed)).count();
    let mean = null.iter().sum::<f64>() / r as f64;
    let se = if !mean.is_finite() {
        f64::INFINITY
    } else if r > 1 {
        let var = null.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64;
        (var / r as f64).sqrt()
    } else {
        0.0
    };
    NullModelSummary {
        index_id: None,
        observed,
        null_mean: mean,
        null_se: se,
        p_value: count as f64 / r as f64,
        p_conservative: (count + 1) as f64 / (r + 1) as f64,
        replicates: r,
        seed,
    }
}

/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::OutOfRangeP(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for (pos, &i) in order.iter().enumerate().rev() {
        let rank = (pos + 1) as f64;
        // p * m / rank can round below p when rank == m
        running = running.min((p_values[i] * m as f64 / rank).max(p_values[i]));
        adjusted[i] = running;
    }
    Ok(adjusted)
}

pub fn is_significant(summary: &NullModelSummary, alpha: f64) -> bool {
    summary.p_value < alpha
}
