//! Index-similarity map: each index is a row of values across many
//! embeddings; rows are z-scored, projected to two principal components,
//! and tested for membership in the triangle spanned by the three PSIs.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::EvaluationReport;
use crate::model::IndexId;

pub const SIMILARITY_SCHEMA_VERSION: u32 = 1;

/// Rows are indices, columns are index values over embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexProfileMatrix {
    row_ids: Vec<String>,
    column_ids: Vec<String>,
    values: Vec<f64>,
}

impl IndexProfileMatrix {
    pub fn new(row_ids: Vec<String>, column_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != row_ids.len() * column_ids.len() {
            return Err(Error::Shape(format!(
                "{} values for a {}x{} profile matrix",
                values.len(),
                row_ids.len(),
                column_ids.len()
            )));
        }
        if column_ids.len() < 2 {
            return Err(Error::Shape("profile matrix needs at least 2 columns".into()));
        }
        if let Some(pos) = values.iter().position(|v| v.is_nan()) {
            let c = column_ids.len();
            return Err(Error::Shape(format!(
                "missing value for `{}` in column `{}`",
                row_ids[pos / c],
                column_ids[pos % c]
            )));
        }
        Ok(IndexProfileMatrix { row_ids, column_ids, values })
    }

    /// One column per scored candidate (over all reports), one row per
    /// index present in every report, in canonical index order.
    pub fn from_reports(reports: &[EvaluationReport]) -> Result<Self> {
        let indices: Vec<IndexId> = IndexId::ALL
            .into_iter()
            .filter(|id| {
                reports.iter().all(|r| r.candidates.iter().all(|c| c.scores.contains_key(id)))
            })
            .collect();
        let mut column_ids = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for r in reports {
            for c in &r.candidates {
                column_ids.push(format!("{}:{}", r.dataset, c.key));
                columns.push(indices.iter().map(|id| c.scores[id].value).collect());
            }
        }
        let mut values = Vec::with_capacity(indices.len() * columns.len());
        for i in 0..indices.len() {
            values.extend(columns.iter().map(|col| col[i]));
        }
        let row_ids = indices.iter().map(|id| id.as_str().to_string()).collect();
        Self::new(row_ids, column_ids, values)
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_ids.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column_ids(&self) -> &[String] {
        &self.column_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    /// Replaces `+inf` (and `-inf`) entries by a finite stand-in ten times
    /// beyond the row's largest finite magnitude. Returns one note per
    /// affected row.
    pub fn replace_infinities(&mut self) -> Vec<String> {
        let c = self.n_cols();
        let mut notes = Vec::new();
        for r in 0..self.n_rows() {
            let row = &mut self.values[r * c..(r + 1) * c];
            let count = row.iter().filter(|v| v.is_infinite()).count();
            if count == 0 {
                continue;
            }
            let max = row.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            let min = row.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
            let hi = stand_in_above(max);
            let lo = -stand_in_above(-min);
            for v in row.iter_mut().filter(|v| v.is_infinite()) {
                *v = if *v > 0.0 { hi } else { lo };
            }
            notes.push(format!(
                "{}: {count} infinite value(s) replaced by {hi:e} (10x the largest finite value)",
                self.row_ids[r]
            ));
        }
        notes
    }
}

fn stand_in_above(max: f64) -> f64 {
    if !max.is_finite() {
        1.0
    } else if max > 0.0 {
        max * 10.0
    } else if max == 0.0 {
        1.0
    } else {
        max / 10.0
    }
}

/// Standardizes each row to mean 0 and sample standard deviation 1.
pub fn zscore_rows(matrix: &IndexProfileMatrix) -> Result<IndexProfileMatrix> {
    let c = matrix.n_cols();
    let mut values = Vec::with_capacity(matrix.values.len());
    for r in 0..matrix.n_rows() {
        let row = matrix.row(r);
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (c - 1) as f64;
        let sd = var.sqrt();
        let scale = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !sd.is_finite() || sd <= 1e-12 * scale {
            return Err(Error::ConstantRow(matrix.row_ids[r].clone()));
        }
        values.extend(row.iter().map(|v| (v - mean) / sd));
    }
    Ok(IndexProfileMatrix {
        row_ids: matrix.row_ids.clone(),
        column_ids: matrix.column_ids.clone(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// `rows x k`, row-major.
    pub scores: Vec<f64>,
    pub k: usize,
    /// Top-k covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Total variance (sum of all eigenvalues).
    pub total_variance: f64,
    /// `k` loading vectors of length `cols`.
    pub loadings: Vec<Vec<f64>>,
}

impl PcaProjection {
    pub fn score(&self, row: usize, component: usize) -> f64 {
        self.scores[row * self.k + component]
    }
}

/// Centered PCA of a row-major `rows x cols` matrix (rows are samples).
///
/// Works on the `rows x rows` Gram matrix, which shares its non-zero
/// spectrum with the column covariance. Each loading vector is signed so
/// that its largest-magnitude entry is positive.
pub fn pca_project(data: &[f64], rows: usize, cols: usize, k: usize) -> Result<PcaProjection> {
    if data.len() != rows * cols {
        return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
    }
    if k == 0 || rows < 2 || k > (rows - 1).min(cols) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} components need 1 <= k <= min(rows - 1, cols) for a {rows}x{cols} matrix"
        )));
    }
    let x = DMatrix::from_row_slice(rows, cols, data);
    let means = x.row_mean();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let dof = (rows - 1) as f64;
    let gram = &centered * centered.transpose() / dof;
    let eig = SymmetricEigen::new(gram);

    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let positive = order.iter().filter(|&&i| eig.eigenvalues[i] > top * 1e-12 && eig.eigenvalues[i] > 0.0).count();
    if positive < k {
        return Err(Error::RankDeficient { requested: k, available: positive });
    }
    let total_variance = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut scores = vec![0.0; rows * k];
    let mut eigenvalues = Vec::with_capacity(k);
    let mut loadings = Vec::with_capacity(k);
    for (j, &e) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[e];
        let u = eig.eigenvectors.column(e);
        let scale = (lambda * dof).sqrt();
        let mut v: Vec<f64> = (centered.transpose() * u).iter().map(|x| x / scale).collect();
        let pivot = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|x| *x *= sign);
        for r in 0..rows {
            scores[r * k + j] = sign * scale * u[r];
        }
        eigenvalues.push(lambda);
        loadings.push(v);
    }
    Ok(PcaProjection { scores, k, eigenvalues, total_variance, loadings })
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Barycentric containment; points on the boundary count as inside.
pub fn psi_triangle_contains(point: [f64; 2], vertices: [[f64; 2]; 3]) -> Result<bool> {
    let [a, b, c] = vertices;
    let area = cross(a, b, c);
    let scale = vertices.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    if area.abs() <= 1e-12 * scale * scale {
        return Err(Error::DegenerateTriangle);
    }
    let w = [cross(b, c, point) / area, cross(c, a, point) / area, cross(a, b, point) / area];
    let tol = 1e-12;
    Ok(w.iter().all(|&x| x >= -tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub index: String,
    pub pc1: f64,
    pub pc2: f64,
    pub in_psi_triangle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMap {
    pub schema_version: u32,
    pub columns: usize,
    pub explained_variance: [f64; 2],
    pub points: Vec<MapPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Full pipeline: infinity replacement, row z-scores, 2-D PCA and triangle
/// flags. Rows `psi_p`, `psi_roc` and `psi_pr` must be present.
pub fn similarity_map(matrix: &IndexProfileMatrix) -> Result<SimilarityMap> {
    let mut m = matrix.clone();
    let notes = m.replace_infinities();
    let z = zscore_rows(&m)?;
    let pca = pca_project(z.values(), z.n_rows(), z.n_cols(), 2)?;
    let coords = |r: usize| [pca.score(r, 0), pca.score(r, 1)];
    let vertex = |id: IndexId| -> Result<[f64; 2]> {
        let r = z
            .row_ids
            .iter()
            .position(|s| s.parse::<IndexId>().ok() == Some(id))
            .ok_or_else(|| Error::Shape(format!("profile matrix lacks row `{id}`")))?;
        Ok(coords(r))
    };
    let vertices = [vertex(IndexId::PsiP)?, vertex(IndexId::PsiRoc)?, vertex(IndexId::PsiPr)?];
    let points = (0..z.n_rows())
        .map(|r| {
            Ok(MapPoint {
                index: z.row_ids[r].clone(),
                pc1: coords(r)[0],
                pc2: coords(r)[1],
                in_psi_triangle: psi_triangle_contains(coords(r), vertices)?,
            })
        })
        .collect::<Result<_>>()?;
    let total = pca.total_variance;
    Ok(SimilarityMap {
        schema_version: SIMILARITY_SCHEMA_VERSION,
        columns: z.n_cols(),
        explained_variance: [pca.eigenvalues[0] / total, pca.eigenvalues[1] / total],
        points,
        notes,
    })
}
