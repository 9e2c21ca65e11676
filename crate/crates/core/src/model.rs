//! Labeled point clouds and index results.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of row indices into labeled groups.
///
/// Group ids follow the lexicographic order of the labels, so id `0` is
/// always the smallest label.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    names: Vec<String>,
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Grouping {
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        for l in labels {
            ids.entry(l.as_ref()).or_insert(0);
        }
        let names: Vec<String> = ids.keys().map(|s| s.to_string()).collect();
        for (i, v) in ids.values_mut().enumerate() {
            *v = i;
        }
        let assignment: Vec<usize> = labels.iter().map(|l| ids[l.as_ref()]).collect();
        Self::from_assignment(names, assignment)
    }

    /// Builds a grouping from explicit group ids. `names[g]` labels group `g`.
    pub(crate) fn from_assignment(names: Vec<String>, assignment: Vec<usize>) -> Self {
        let mut members = vec![Vec::new(); names.len()];
        for (row, &g) in assignment.iter().enumerate() {
            members[g].push(row);
        }
        Grouping { names, assignment, members }
    }

    /// Same group names and sizes with a different row assignment.
    pub(crate) fn relabeled(&self, assignment: Vec<usize>) -> Self {
        Self::from_assignment(self.names.clone(), assignment)
    }

    pub fn n_groups(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, group: usize) -> &str {
        &self.names[group]
    }

    pub fn id_of(&self, label: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(label)).ok()
    }

    /// Group id of every row.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Sorted row indices of one group.
    pub fn members(&self, group: usize) -> &[usize] {
        &self.members[group]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// All unordered group pairs `(a, b)` with `a < b`, in lexicographic
    /// label order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let g = self.n_groups();
        (0..g).flat_map(|a| (a + 1..g).map(move |b| (a, b))).collect()
    }
}

/// `N` points in `D` dimensions, each carrying a group label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    coords: Vec<f64>,
    n_dims: usize,
    labels: Vec<String>,
    grouping: Grouping,
}

impl LabeledPointCloud {
    /// Builds and validates a cloud from row vectors and labels.
    pub fn new<S: Into<String>>(rows: Vec<Vec<f64>>, labels: Vec<S>) -> Result<Self> {
        let n_dims = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_dims) {
            return Err(Error::Shape(format!(
                "row {i} has {} coordinates, expected {n_dims}",
                r.len()
            )));
        }
        let coords = rows.into_iter().flatten().collect();
        Self::from_flat(coords, n_dims, labels)
    }

    /// Builds and validates a cloud from row-major coordinates.
    pub fn from_flat<S: Into<String>>(
        coords: Vec<f64>,
        n_dims: usize,
        labels: Vec<S>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if n_dims == 0 {
            return Err(Error::Shape("points need at least one dimension".into()));
        }
        if coords.len() != labels.len() * n_dims {
            return Err(Error::Shape(format!(
                "{} coordinates do not fit {} labels in {n_dims} dimensions",
                coords.len(),
                labels.len()
            )));
        }
        let grouping = Grouping::from_labels(&labels);
        let cloud = LabeledPointCloud { coords, n_dims, labels, grouping };
        cloud.validate()?;
        Ok(cloud)
    }

    /// Checks every cloud invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 2 {
            return Err(Error::TooFewPoints { got: n, min: 2 });
        }
        if self.n_dims == 0 {
            return Err(Error::Shape("points need at least one dimension".into()));
        }
        if let Some(pos) = self.coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / self.n_dims, column: pos % self.n_dims });
        }
        if self.grouping.n_groups() < 2 {
            return Err(Error::DegenerateLabels { found: self.grouping.n_groups() });
        }
        for g in 0..self.grouping.n_groups() {
            if self.grouping.members(g).is_empty() {
                return Err(Error::EmptyGroup(self.grouping.name(g).to_string()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.n_dims)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn grouping(&self) -> &Grouping {
        &self.grouping
    }

    /// Same labels, new coordinates (e.g. after normalization).
    pub fn with_coords(&self, coords: Vec<f64>, n_dims: usize) -> Result<Self> {
        Self::from_flat(coords, n_dims, self.labels.clone())
    }

    /// Rows `indices` in the given order, with their labels.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let coords = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        Self::from_flat(coords, self.n_dims, labels)
    }

    pub fn max_abs_coord(&self) -> f64 {
        self.coords.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// The nine separability indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexId {
    PsiP,
    PsiRoc,
    PsiPr,
    Sh,
    Ch,
    Dn,
    Bz,
    DbStar,
    Th,
}

impl IndexId {
    pub const ALL: [IndexId; 9] = [
        IndexId::PsiP,
        IndexId::PsiRoc,
        IndexId::PsiPr,
        IndexId::Sh,
        IndexId::Ch,
        IndexId::Dn,
        IndexId::Bz,
        IndexId::DbStar,
        IndexId::Th,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IndexId::PsiP => "psi_p",
            IndexId::PsiRoc => "psi_roc",
            IndexId::PsiPr => "psi_pr",
            IndexId::Sh => "sh",
            IndexId::Ch => "ch",
            IndexId::Dn => "dn",
            IndexId::Bz => "bz",
            IndexId::DbStar => "db_star",
            IndexId::Th => "th",
        }
    }

    pub fn better(self) -> Better {
        match self {
            IndexId::PsiP => Better::Lower,
            _ => Better::Higher,
        }
    }

    pub fn bounded_range(self) -> Option<Bounds> {
        match self {
            IndexId::PsiP | IndexId::PsiRoc | IndexId::PsiPr | IndexId::Th => {
                Some(Bounds::closed(0.0, 1.0))
            }
            IndexId::Sh => Some(Bounds::closed(-1.0, 1.0)),
            IndexId::DbStar => Some(Bounds { lo: 0.0, hi: 1.0, lo_open: true }),
            IndexId::Ch | IndexId::Dn | IndexId::Bz => None,
        }
    }

    pub fn is_psi(self) -> bool {
        matches!(self, IndexId::PsiP | IndexId::PsiRoc | IndexId::PsiPr)
    }
}

impl fmt::Display for IndexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexId {
    type Err = Error;

    /// Accepts `psi-roc`, `psi_roc`, `PSI_ROC`, `db*` and so on.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let id = match key.as_str() {
            "psi_p" => IndexId::PsiP,
            "psi_roc" => IndexId::PsiRoc,
            "psi_pr" => IndexId::PsiPr,
            "sh" => IndexId::Sh,
            "ch" => IndexId::Ch,
            "dn" => IndexId::Dn,
            "bz" => IndexId::Bz,
            "db_star" | "db*" | "dbstar" => IndexId::DbStar,
            "th" => IndexId::Th,
            _ => return Err(Error::InvalidArgument(format!("unknown index `{s}`"))),
        };
        Ok(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Better {
    Higher,
    Lower,
}

impl Better {
    /// True when `a` is at least as good as `b`.
    pub fn at_least_as_good(self, a: f64, b: f64) -> bool {
        match self {
            Better::Higher => a >= b,
            Better::Lower => a <= b,
        }
    }
}

/// Range of attainable values; `lo_open` marks `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub lo_open: bool,
}

impl Bounds {
    pub const fn closed(lo: f64, hi: f64) -> Self {
        Bounds { lo, hi, lo_open: false }
    }
}

/// Annotation for values produced by a guard rather than the plain formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    /// The formula diverges; the value is `+inf`.
    Diverged,
    /// 0/0 in the formula, resolved to 0 (or to the coincident-centroid
    /// sentinel for DB*).
    Degenerate,
    /// Some cluster is a singleton; its silhouette is taken as 0.
    SingletonSilhouette,
    /// At least one group pair had coincident centroids and contributed the
    /// neutral triple.
    CoincidentPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexScore {
    pub index_id: IndexId,
    #[serde(with = "crate::serde_f64")]
    pub value: f64,
    pub better: Better,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounded_range: Option<Bounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<ScoreFlag>,
}

impl IndexScore {
    pub fn new(index_id: IndexId, value: f64, flag: Option<ScoreFlag>) -> Self {
        let flag = flag.or(if value.is_infinite() { Some(ScoreFlag::Diverged) } else { None });
        IndexScore {
            index_id,
            value,
            better: index_id.better(),
            bounded_range: index_id.bounded_range(),
            flag,
        }
    }
}

/// Two groups mapped onto the line through their centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPair {
    pub label_a: String,
    pub label_b: String,
    pub projected_a: Vec<f64>,
    pub projected_b: Vec<f64>,
}
