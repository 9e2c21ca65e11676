//! Baseline cluster validity indices over Euclidean distance: silhouette
//! (SH), Calinski-Harabasz (CH), Dunn (DN), the generalized Dunn index of
//! Bezdek (BZ), the bounded Davies-Bouldin transform (DB*) and Thornton's
//! nearest-neighbour agreement (TH).
//!
//! Divergent values are returned as `+inf` and carry [`ScoreFlag::Diverged`].
//! All centroids here are arithmetic means.

use serde::{Deserialize, Serialize};

use crate::model::{Grouping, LabeledPointCloud, ScoreFlag};

/// Condensed pairwise Euclidean distances plus each point's nearest
/// neighbour. Both depend only on the coordinates, so one instance serves
/// every relabeling of the same cloud.
#[derive(Debug, Clone)]
pub struct PairwiseDistances {
    n: usize,
    condensed: Vec<f64>,
    nearest: Vec<usize>,
}

impl PairwiseDistances {
    pub fn new(cloud: &LabeledPointCloud) -> Self {
        let n = cloud.len();
        let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            let a = cloud.row(i);
            for j in i + 1..n {
                condensed.push(euclidean(a, cloud.row(j)));
            }
        }
        let mut d = PairwiseDistances { n, condensed, nearest: Vec::new() };
        d.nearest = (0..n).map(|i| d.scan_nearest(i)).collect();
        d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Less => self.condensed[self.offset(i) + j - i - 1],
            Greater => self.condensed[self.offset(j) + i - j - 1],
        }
    }

    #[inline]
    fn offset(&self, i: usize) -> usize {
        i * self.n - i * (i + 1) / 2
    }

    /// Distances from row `i` to rows `i+1..n`.
    #[inline]
    fn upper_row(&self, i: usize) -> &[f64] {
        let start = self.offset(i);
        &self.condensed[start..start + (self.n - i - 1)]
    }

    fn scan_nearest(&self, i: usize) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in (0..self.n).filter(|&j| j != i) {
            let d = self.get(i, j);
            // strict comparison keeps the lowest index on ties
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    }

    /// Nearest other row of every row; distance ties go to the lowest index.
    pub fn nearest_neighbors(&self) -> &[usize] {
        &self.nearest
    }
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Value with an optional guard annotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guarded {
    pub value: f64,
    pub flag: Option<ScoreFlag>,
}

impl Guarded {
    fn plain(value: f64) -> Self {
        let flag = value.is_infinite().then_some(ScoreFlag::Diverged);
        Guarded { value, flag }
    }

    fn flagged(value: f64, flag: ScoreFlag) -> Self {
        Guarded { value, flag: Some(flag) }
    }
}

/// All six indices of one cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CviBundle {
    pub sh: f64,
    #[serde(with = "crate::serde_f64")]
    pub ch: f64,
    #[serde(with = "crate::serde_f64")]
    pub dn: f64,
    #[serde(with = "crate::serde_f64")]
    pub bz: f64,
    #[serde(with = "crate::serde_f64")]
    pub db: f64,
    pub db_star: f64,
    pub th: f64,
}

pub fn cvi_bundle(cloud: &LabeledPointCloud) -> CviBundle {
    let dist = PairwiseDistances::new(cloud);
    let g = cloud.grouping();
    let (db, db_star) = davies_bouldin_with(cloud, g);
    CviBundle {
        sh: silhouette_with(&dist, g).value,
        ch: calinski_harabasz_with(cloud, g).value,
        dn: dunn_with(cloud, &dist, g).value,
        bz: bezdek_with(cloud, &dist, g).value,
        db,
        db_star: db_star.value,
        th: thornton_with(&dist, g),
    }
}

pub fn silhouette(cloud: &LabeledPointCloud) -> f64 {
    silhouette_with(&PairwiseDistances::new(cloud), cloud.grouping()).value
}

pub fn calinski_harabasz(cloud: &LabeledPointCloud) -> f64 {
    calinski_harabasz_with(cloud, cloud.grouping()).value
}

pub fn dunn(cloud: &LabeledPointCloud) -> f64 {
    dunn_with(cloud, &PairwiseDistances::new(cloud), cloud.grouping()).value
}

pub fn bezdek(cloud: &LabeledPointCloud) -> f64 {
    bezdek_with(cloud, &PairwiseDistances::new(cloud), cloud.grouping()).value
}

/// `(DB, DB*)`.
pub fn davies_bouldin_star(cloud: &LabeledPointCloud) -> (f64, f64) {
    let (db, star) = davies_bouldin_with(cloud, cloud.grouping());
    (db, star.value)
}

pub fn thornton(cloud: &LabeledPointCloud) -> f64 {
    thornton_with(&PairwiseDistances::new(cloud), cloud.grouping())
}

/// Spread below this counts as zero; keeps `mean(x, x, x) != x` rounding
/// from turning an exact collapse into a huge finite value.
fn spread_epsilon(cloud: &LabeledPointCloud) -> f64 {
    1e-12 * (1.0 + cloud.max_abs_coord())
}

fn mean_centroids(cloud: &LabeledPointCloud, grouping: &Grouping) -> Vec<Vec<f64>> {
    let d = cloud.n_dims();
    (0..grouping.n_groups())
        .map(|g| {
            let members = grouping.members(g);
            let mut c = vec![0.0; d];
            for &i in members {
                for (acc, v) in c.iter_mut().zip(cloud.row(i)) {
                    *acc += v;
                }
            }
            let n = members.len() as f64;
            c.iter_mut().for_each(|v| *v /= n);
            c
        })
        .collect()
}

/// Mean distance of each group's points to its mean centroid.
fn scatter(cloud: &LabeledPointCloud, grouping: &Grouping, centroids: &[Vec<f64>]) -> Vec<f64> {
    let eps = spread_epsilon(cloud);
    (0..grouping.n_groups())
        .map(|g| {
            let members = grouping.members(g);
            let s = members.iter().map(|&i| euclidean(cloud.row(i), &centroids[g])).sum::<f64>()
                / members.len() as f64;
            if s <= eps {
                0.0
            } else {
                s
            }
        })
        .collect()
}

/// Per-cluster mean of per-sample silhouettes, averaged over clusters.
pub(crate) fn silhouette_with(dist: &PairwiseDistances, grouping: &Grouping) -> Guarded {
    let n = dist.len();
    let k = grouping.n_groups();
    let assign = grouping.assignment();
    // sums[i * k + g]: total distance from i to the members of g
    let mut sums = vec![0.0; n * k];
    for i in 0..n {
        let gi = assign[i];
        for (off, &d) in dist.upper_row(i).iter().enumerate() {
            let j = i + 1 + off;
            sums[i * k + assign[j]] += d;
            sums[j * k + gi] += d;
        }
    }
    let sizes = grouping.sizes();
    let mut singleton = false;
    let mut total = 0.0;
    for g in 0..k {
        let members = grouping.members(g);
        if members.len() == 1 {
            singleton = true;
            continue;
        }
        let mut cluster_sum = 0.0;
        for &i in members {
            let a = sums[i * k + g] / (sizes[g] - 1) as f64;
            let b = (0..k)
                .filter(|&h| h != g)
                .map(|h| sums[i * k + h] / sizes[h] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                cluster_sum += (b - a) / denom;
            }
        }
        total += cluster_sum / members.len() as f64;
    }
    let value = total / k as f64;
    if singleton {
        Guarded::flagged(value, ScoreFlag::SingletonSilhouette)
    } else {
        Guarded::plain(value)
    }
}

pub(crate) fn calinski_harabasz_with(cloud: &LabeledPointCloud, grouping: &Grouping) -> Guarded {
    let centroids = mean_centroids(cloud, grouping);
    let d = cloud.n_dims();
    let t = cloud.len() as f64;
    let mut overall = vec![0.0; d];
    for row in cloud.rows() {
        overall.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    overall.iter_mut().for_each(|v| *v /= t);

    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut ss_b = 0.0;
    let mut ss_w = 0.0;
    for (g, c) in centroids.iter().enumerate() {
        let members = grouping.members(g);
        ss_b += members.len() as f64 * sq(c, &overall);
        ss_w += members.iter().map(|&i| sq(cloud.row(i), c)).sum::<f64>();
    }
    let eps = spread_epsilon(cloud);
    let zero = eps * eps * t;
    let k = grouping.n_groups() as f64;
    match (ss_b <= zero, ss_w <= zero) {
        (true, true) => Guarded::flagged(0.0, ScoreFlag::Degenerate),
        (false, true) => Guarded::plain(f64::INFINITY),
        _ => Guarded::plain(ss_b / ss_w * ((t - k) / (k - 1.0))),
    }
}

fn dunn_ratio(separation: f64, diameter: f64) -> Guarded {
    if diameter > 0.0 {
        Guarded::plain(separation / diameter)
    } else if separation > 0.0 {
        Guarded::plain(f64::INFINITY)
    } else {
        Guarded::flagged(0.0, ScoreFlag::Degenerate)
    }
}

/// Minimum single-linkage distance over the maximum cluster diameter.
pub(crate) fn dunn_with(
    cloud: &LabeledPointCloud,
    dist: &PairwiseDistances,
    grouping: &Grouping,
) -> Guarded {
    let assign = grouping.assignment();
    let mut min_between = f64::INFINITY;
    let mut max_within = 0.0_f64;
    for i in 0..dist.len() {
        for (off, &d) in dist.upper_row(i).iter().enumerate() {
            if assign[i] == assign[i + 1 + off] {
                max_within = max_within.max(d);
            } else {
                min_between = min_between.min(d);
            }
        }
    }
    let eps = spread_epsilon(cloud);
    dunn_ratio(min_between, if max_within <= eps { 0.0 } else { max_within })
}

/// Mean-linkage separation over twice the mean distance to the centroid.
pub(crate) fn bezdek_with(
    cloud: &LabeledPointCloud,
    dist: &PairwiseDistances,
    grouping: &Grouping,
) -> Guarded {
    let k = grouping.n_groups();
    let assign = grouping.assignment();
    let mut pair_sums = vec![0.0; k * k];
    for i in 0..dist.len() {
        let gi = assign[i];
        for (off, &d) in dist.upper_row(i).iter().enumerate() {
            let gj = assign[i + 1 + off];
            if gi != gj {
                pair_sums[gi.min(gj) * k + gi.max(gj)] += d;
            }
        }
    }
    let sizes = grouping.sizes();
    let mut separation = f64::INFINITY;
    for (a, b) in grouping.pairs() {
        separation = separation.min(pair_sums[a * k + b] / (sizes[a] * sizes[b]) as f64);
    }
    let centroids = mean_centroids(cloud, grouping);
    let diameter = scatter(cloud, grouping, &centroids).into_iter().fold(0.0, f64::max) * 2.0;
    dunn_ratio(separation, diameter)
}

/// `(DB, DB*)`; coincident mean centroids give `(inf, 0)`.
pub(crate) fn davies_bouldin_with(cloud: &LabeledPointCloud, grouping: &Grouping) -> (f64, Guarded) {
    let centroids = mean_centroids(cloud, grouping);
    let s = scatter(cloud, grouping, &centroids);
    let eps = spread_epsilon(cloud);
    let k = grouping.n_groups();
    let mut total = 0.0;
    for i in 0..k {
        let mut r = 0.0_f64;
        for j in (0..k).filter(|&j| j != i) {
            let d = euclidean(&centroids[i], &centroids[j]);
            if d <= eps {
                return (f64::INFINITY, Guarded::flagged(0.0, ScoreFlag::Degenerate));
            }
            r = r.max((s[i] + s[j]) / d);
        }
        total += r;
    }
    let db = total / k as f64;
    (db, Guarded::plain(1.0 / (1.0 + db)))
}

/// Fraction of points whose nearest neighbour carries the same label.
pub(crate) fn thornton_with(dist: &PairwiseDistances, grouping: &Grouping) -> f64 {
    let assign = grouping.assignment();
    let agree = dist
        .nearest_neighbors()
        .iter()
        .enumerate()
        .filter(|&(i, &j)| assign[i] == assign[j])
        .count();
    agree as f64 / dist.len() as f64
}
