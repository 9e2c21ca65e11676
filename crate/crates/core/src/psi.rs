//! Projection separability: each pair of groups is projected onto the line
//! through the two group centroids, and the resulting 1-D coordinates are
//! scored with the Mann-Whitney p-value, AUC-ROC and AUC-PR. The per-pair
//! values are averaged into PSI-P, PSI-ROC and PSI-PR.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroupPair, Grouping, LabeledPointCloud};
use crate::stats::{auc_pr, auc_roc, mann_whitney_p};

/// How a group centroid is located.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentroidMode {
    Mean,
    #[default]
    Median,
    Mode,
}

impl FromStr for CentroidMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(CentroidMode::Mean),
            "median" => Ok(CentroidMode::Median),
            "mode" => Ok(CentroidMode::Mode),
            _ => Err(Error::InvalidArgument(format!("unknown centroid mode `{s}`"))),
        }
    }
}

impl fmt::Display for CentroidMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CentroidMode::Mean => "mean",
            CentroidMode::Median => "median",
            CentroidMode::Mode => "mode",
        })
    }
}

/// Scores of one group pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub label_a: String,
    pub label_b: String,
    /// Group treated as the positive class for AUC-ROC and AUC-PR.
    pub positive: String,
    pub p: f64,
    pub auc_roc: f64,
    pub auc_pr: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub coincident: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiResult {
    pub psi_p: f64,
    pub psi_roc: f64,
    pub psi_pr: f64,
    pub per_pair: Vec<PairScore>,
}

impl PsiResult {
    pub fn any_coincident(&self) -> bool {
        self.per_pair.iter().any(|p| p.coincident)
    }
}

/// Coordinate-wise centroid of a non-empty set of points.
pub fn centroid(points: &[&[f64]], mode: CentroidMode) -> Result<Vec<f64>> {
    let first = points.first().ok_or(Error::EmptySubset)?;
    let dims = first.len();
    let mut column = Vec::with_capacity(points.len());
    let mut out = Vec::with_capacity(dims);
    for d in 0..dims {
        column.clear();
        column.extend(points.iter().map(|p| p[d]));
        out.push(match mode {
            CentroidMode::Mean => column.iter().sum::<f64>() / column.len() as f64,
            CentroidMode::Median => median_in_place(&mut column),
            CentroidMode::Mode => mode_of(&column),
        });
    }
    Ok(out)
}

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Most frequent value after rounding to 12 significant digits; ties go to
/// the smallest value.
fn mode_of(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<OrderedKey, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(OrderedKey(round_sig12(v))).or_insert(0) += 1;
    }
    // BTreeMap iterates ascending, so the first maximum is the smallest value
    let mut best = (f64::NAN, 0usize);
    for (k, &c) in &counts {
        if c > best.1 {
            best = (k.0, c);
        }
    }
    best.0
}

fn round_sig12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v + 0.0;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedKey(f64);

impl Eq for OrderedKey {}

impl PartialOrd for OrderedKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Threshold on `|b - a|` below which two centroids count as coincident.
pub fn line_epsilon(max_abs_coord: f64) -> f64 {
    1e-12 * (1.0 + max_abs_coord)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_line(a: &[f64], b: &[f64], eps: f64) -> Result<Vec<f64>> {
    let ab: Vec<f64> = b.iter().zip(a).map(|(b, a)| b - a).collect();
    if dot(&ab, &ab).sqrt() <= eps {
        return Err(Error::CoincidentCentroids);
    }
    Ok(ab)
}

fn endpoint_scale(a: &[f64], b: &[f64]) -> f64 {
    a.iter().chain(b).fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Position `t` of the orthogonal projection of `p` onto the line through
/// `a` and `b`, with `a` at `t = 0` and `b` at `t = 1`.
pub fn line_coordinate(p: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    let ab = check_line(a, b, line_epsilon(endpoint_scale(a, b)))?;
    Ok(coordinate_along(p, a, &ab))
}

fn coordinate_along(p: &[f64], a: &[f64], ab: &[f64]) -> f64 {
    let ap_ab: f64 = p.iter().zip(a).zip(ab).map(|((p, a), d)| (p - a) * d).sum();
    ap_ab / dot(ab, ab)
}

/// Orthogonal projection of `p` onto the infinite line through `a` and `b`.
pub fn project_to_line(p: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let ab = check_line(a, b, line_epsilon(endpoint_scale(a, b)))?;
    let t = coordinate_along(p, a, &ab);
    Ok(a.iter().zip(&ab).map(|(a, d)| a + t * d).collect())
}

fn group_rows<'a>(cloud: &'a LabeledPointCloud, grouping: &Grouping, g: usize) -> Vec<&'a [f64]> {
    grouping.members(g).iter().map(|&i| cloud.row(i)).collect()
}

/// Projects two groups onto the line joining their centroids.
///
/// `None` when the centroids coincide.
pub fn project_pair(
    cloud: &LabeledPointCloud,
    label_a: &str,
    label_b: &str,
    mode: CentroidMode,
) -> Result<Option<GroupPair>> {
    let g = cloud.grouping();
    let a = g.id_of(label_a).ok_or_else(|| Error::UnknownLabel(label_a.into()))?;
    let b = g.id_of(label_b).ok_or_else(|| Error::UnknownLabel(label_b.into()))?;
    let centroids = [
        centroid(&group_rows(cloud, g, a), mode)?,
        centroid(&group_rows(cloud, g, b), mode)?,
    ];
    Ok(project_groups(cloud, g, (a, b), &centroids, line_epsilon(cloud.max_abs_coord())))
}

fn project_groups(
    cloud: &LabeledPointCloud,
    grouping: &Grouping,
    (a, b): (usize, usize),
    centroids: &[Vec<f64>; 2],
    eps: f64,
) -> Option<GroupPair> {
    let [ca, cb] = centroids;
    let ab = check_line(ca, cb, eps).ok()?;
    let project = |g: usize| -> Vec<f64> {
        grouping.members(g).iter().map(|&i| coordinate_along(cloud.row(i), ca, &ab)).collect()
    };
    Some(GroupPair {
        label_a: grouping.name(a).to_string(),
        label_b: grouping.name(b).to_string(),
        projected_a: project(a),
        projected_b: project(b),
    })
}

/// The three statistics for one group pair.
///
/// The positive class is the group whose centroid lies further along the
/// line (always `label_b`'s centroid at `t = 1` in our parameterization).
/// Coincident centroids give the neutral triple `(1, 0.5, prevalence)`.
pub fn psi_pair(
    cloud: &LabeledPointCloud,
    label_a: &str,
    label_b: &str,
    mode: CentroidMode,
) -> Result<PairScore> {
    let g = cloud.grouping();
    let a = g.id_of(label_a).ok_or_else(|| Error::UnknownLabel(label_a.into()))?;
    let b = g.id_of(label_b).ok_or_else(|| Error::UnknownLabel(label_b.into()))?;
    let centroids = [
        centroid(&group_rows(cloud, g, a), mode)?,
        centroid(&group_rows(cloud, g, b), mode)?,
    ];
    pair_score(cloud, g, (a, b), &centroids, line_epsilon(cloud.max_abs_coord()))
}

fn pair_score(
    cloud: &LabeledPointCloud,
    grouping: &Grouping,
    (a, b): (usize, usize),
    centroids: &[Vec<f64>; 2],
    eps: f64,
) -> Result<PairScore> {
    let Some(pair) = project_groups(cloud, grouping, (a, b), centroids, eps) else {
        // coincident: ties on the line fall back to label order, smaller first
        let (na, nb) = (grouping.members(a).len(), grouping.members(b).len());
        return Ok(PairScore {
            label_a: grouping.name(a).to_string(),
            label_b: grouping.name(b).to_string(),
            positive: grouping.name(a).to_string(),
            p: 1.0,
            auc_roc: 0.5,
            auc_pr: na as f64 / (na + nb) as f64,
            coincident: true,
        });
    };
    // centroid a sits at t = 0 and centroid b at t = 1
    let (pos, neg, positive) = (&pair.projected_b, &pair.projected_a, pair.label_b.clone());
    Ok(PairScore {
        p: mann_whitney_p(&pair.projected_a, &pair.projected_b)?,
        auc_roc: auc_roc(pos, neg)?,
        auc_pr: auc_pr(pos, neg)?,
        positive,
        label_a: pair.label_a,
        label_b: pair.label_b,
        coincident: false,
    })
}

/// PSI-P, PSI-ROC and PSI-PR over every unordered group pair.
pub fn psi_all(cloud: &LabeledPointCloud, mode: CentroidMode) -> Result<PsiResult> {
    psi_with_grouping(cloud, cloud.grouping(), mode)
}

/// Like [`psi_all`] with the cloud's coordinates but an arbitrary grouping
/// of its rows (used by the permutation null model).
pub fn psi_with_grouping(
    cloud: &LabeledPointCloud,
    grouping: &Grouping,
    mode: CentroidMode,
) -> Result<PsiResult> {
    let centroids: Vec<Vec<f64>> = (0..grouping.n_groups())
        .map(|g| centroid(&group_rows(cloud, grouping, g), mode))
        .collect::<Result<_>>()?;
    let eps = line_epsilon(cloud.max_abs_coord());
    let per_pair: Vec<PairScore> = grouping
        .pairs()
        .into_iter()
        .map(|(a, b)| {
            let cs = [centroids[a].clone(), centroids[b].clone()];
            pair_score(cloud, grouping, (a, b), &cs, eps)
        })
        .collect::<Result<_>>()?;
    let m = per_pair.len() as f64;
    let mean = |f: fn(&PairScore) -> f64| per_pair.iter().map(f).sum::<f64>() / m;
    Ok(PsiResult {
        psi_p: mean(|p| p.p),
        psi_roc: mean(|p| p.auc_roc),
        psi_pr: mean(|p| p.auc_pr),
        per_pair,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn cloud_1d(groups: &[(&str, &[f64])]) -> LabeledPointCloud {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (l, vs) in groups {
            for &v in *vs {
                rows.push(vec![v]);
                labels.push(l.to_string());
            }
        }
        LabeledPointCloud::new(rows, labels).unwrap()
    }

    #[test]
    fn centroid_modes() {
        let pts: [&[f64]; 2] = [&[0.0, 0.0], &[2.0, 2.0]];
        assert_eq!(centroid(&pts, CentroidMode::Median).unwrap(), vec![1.0, 1.0]);
        let pts: [&[f64]; 3] = [&[0.0, 0.0], &[0.0, 0.0], &[3.0, 0.0]];
        assert_eq!(centroid(&pts, CentroidMode::Mode).unwrap(), vec![0.0, 0.0]);
        let pts: [&[f64]; 2] = [&[1.0, 5.0], &[3.0, 7.0]];
        assert_eq!(centroid(&pts, CentroidMode::Mean).unwrap(), vec![2.0, 6.0]);
        assert!(matches!(centroid(&[], CentroidMode::Mean), Err(Error::EmptySubset)));
    }

    #[test]
    fn mode_ties_pick_smallest() {
        let pts: [&[f64]; 4] = [&[3.0], &[1.0], &[3.0], &[1.0]];
        assert_eq!(centroid(&pts, CentroidMode::Mode).unwrap(), vec![1.0]);
        // values equal to 12 significant digits share a bin
        let pts: [&[f64]; 3] = [&[0.1 + 0.2], &[0.3], &[5.0]];
        assert_abs_diff_eq!(centroid(&pts, CentroidMode::Mode).unwrap()[0], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_line(&[1.0, 1.0], &[0.0, 0.0], &[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project_to_line(&[0.0, 0.0], &[0.0, 0.0], &[2.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(project_to_line(&[3.0, 4.0], &[0.0, 0.0], &[0.0, 2.0]).unwrap(), vec![0.0, 4.0]);
        assert!(matches!(
            project_to_line(&[1.0], &[2.0], &[2.0]),
            Err(Error::CoincidentCentroids)
        ));
    }

    #[test]
    fn line_coordinate_examples() {
        let (a, b) = ([0.0, 0.0], [2.0, 0.0]);
        assert_eq!(line_coordinate(&a, &a, &b).unwrap(), 0.0);
        assert_eq!(line_coordinate(&b, &a, &b).unwrap(), 1.0);
        assert_eq!(line_coordinate(&[4.0, 0.0], &a, &b).unwrap(), 2.0);
    }

    #[test]
    fn pair_on_1d_cloud() {
        let cloud = cloud_1d(&[("A", &[0.0, 1.0]), ("B", &[5.0, 6.0])]);
        let s = psi_pair(&cloud, "A", "B", CentroidMode::Median).unwrap();
        assert_abs_diff_eq!(s.p, 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(s.auc_roc, 1.0);
        assert_eq!(s.auc_pr, 1.0);
        assert_eq!(s.positive, "B");
    }

    #[test]
    fn identical_groups_give_neutral_triple() {
        let cloud = cloud_1d(&[("A", &[0.0, 1.0, 2.0]), ("B", &[0.0, 1.0, 2.0])]);
        let s = psi_pair(&cloud, "A", "B", CentroidMode::Median).unwrap();
        assert!(s.coincident);
        assert_eq!((s.p, s.auc_roc, s.auc_pr), (1.0, 0.5, 0.5));
    }

    #[test]
    fn unknown_label() {
        let cloud = cloud_1d(&[("A", &[0.0, 1.0]), ("B", &[5.0, 6.0])]);
        assert!(matches!(
            psi_pair(&cloud, "A", "C", CentroidMode::Median),
            Err(Error::UnknownLabel(l)) if l == "C"
        ));
    }

    #[test]
    fn reflection_keeps_auc() {
        let rows = vec![vec![-3.0, 1.0], vec![-2.0, -1.0], vec![-1.5, 0.5], vec![3.0, -1.0], vec![2.0, 1.0], vec![1.0, 0.2]];
        let labels = vec!["a", "a", "b", "a", "b", "b"];
        let cloud = LabeledPointCloud::new(rows.clone(), labels.clone()).unwrap();
        let flipped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let cloud_f = LabeledPointCloud::new(flipped, labels).unwrap();
        let s = psi_pair(&cloud, "a", "b", CentroidMode::Median).unwrap();
        let f = psi_pair(&cloud_f, "a", "b", CentroidMode::Median).unwrap();
        assert_abs_diff_eq!(s.auc_roc, f.auc_roc, epsilon = 1e-12);
    }

    #[test]
    fn three_separated_groups() {
        let cloud = cloud_1d(&[("a", &[0.0, 1.0]), ("b", &[5.0, 6.0]), ("c", &[10.0, 11.0])]);
        let r = psi_all(&cloud, CentroidMode::Median).unwrap();
        assert_eq!(r.per_pair.len(), 3);
        assert_eq!(r.psi_roc, 1.0);
        assert_eq!(r.psi_pr, 1.0);
        let labels: Vec<(&str, &str)> =
            r.per_pair.iter().map(|p| (p.label_a.as_str(), p.label_b.as_str())).collect();
        assert_eq!(labels, vec![("a", "b"), ("a", "c"), ("b", "c")]);
    }

    #[test]
    fn two_groups_single_pair() {
        let cloud = cloud_1d(&[("a", &[0.0, 2.0, 1.0]), ("b", &[1.5, 6.0])]);
        let r = psi_all(&cloud, CentroidMode::Mean).unwrap();
        assert_eq!(r.per_pair.len(), 1);
        assert_eq!(r.psi_roc, r.per_pair[0].auc_roc);
        assert_eq!(r.psi_p, r.per_pair[0].p);
        assert_eq!(r.psi_pr, r.per_pair[0].auc_pr);
    }
}
