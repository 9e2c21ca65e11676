//! CSV and manifest I/O.
//!
//! Files are UTF-8 CSV with a header row and `.` as decimal separator.
//! Floats are written in shortest round-trip form, so a written cloud reads
//! back bit-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{normalize_cloud, CandidateKey, EmbeddingCandidate, EvaluationReport, Normalization};
use crate::model::LabeledPointCloud;
use crate::serde_f64::parse_special;
use crate::similarity::{IndexProfileMatrix, SimilarityMap};

pub const DEFAULT_LABEL_COLUMN: &str = "label";

pub fn load_labeled_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledPointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled_csv(file, label_column)
}

/// Every column except `label_column` is parsed as a coordinate, in header
/// order.
pub fn read_labeled_csv<R: Read>(reader: R, label_column: &str) -> Result<LabeledPointCloud> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let n_dims = headers.len() - 1;
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        for (c, cell) in rec.iter().enumerate() {
            if c == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: headers.get(c).unwrap_or("?").to_string(),
                message: format!("`{cell}` is not a number"),
            })?;
            coords.push(v);
        }
    }
    LabeledPointCloud::from_flat(coords, n_dims, labels)
}

/// Writes coordinates as `x0, x1, ...` (or the given names) followed by the
/// label column.
pub fn write_labeled_csv<W: Write>(
    cloud: &LabeledPointCloud,
    writer: W,
    coord_names: Option<&[&str]>,
    label_column: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match coord_names {
        Some(names) if names.len() == cloud.n_dims() => names.iter().map(|s| s.to_string()).collect(),
        Some(names) => {
            return Err(Error::Shape(format!(
                "{} column names for {} dimensions",
                names.len(),
                cloud.n_dims()
            )))
        }
        None => (0..cloud.n_dims()).map(|d| format!("x{d}")).collect(),
    };
    header.push(label_column.to_string());
    w.write_record(&header)?;
    for (row, label) in cloud.rows().zip(cloud.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(label.clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn default_format() -> String {
    "csv".to_string()
}

fn default_label_column() -> String {
    DEFAULT_LABEL_COLUMN.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub method: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub normalization: Normalization,
    pub path: PathBuf,
    /// Apply `normalization` to the loaded coordinates; otherwise it only
    /// tags an embedding computed from already-normalized data.
    #[serde(default)]
    pub apply_normalization: bool,
}

/// Candidate list for an evaluation, as JSON. Relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateManifest {
    #[serde(default)]
    pub dataset: String,
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    pub candidates: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl CandidateManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut m: CandidateManifest = serde_json::from_reader(file)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if m.dataset.is_empty() {
            m.dataset = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        m.check()?;
        Ok(m)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != "csv" {
            return Err(Error::Manifest(format!("unsupported data format `{}`", self.format)));
        }
        if self.candidates.is_empty() {
            return Err(Error::Manifest("no candidates listed".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.candidates {
            let key = e.key();
            if !seen.insert(key.clone()) {
                return Err(Error::Manifest(format!("duplicate candidate {key}")));
            }
            let p = self.resolve(&e.path);
            if !p.is_file() {
                return Err(Error::Manifest(format!("{}: no such file", p.display())));
            }
        }
        Ok(())
    }

    pub fn load_candidates(&self) -> Result<Vec<EmbeddingCandidate>> {
        self.candidates
            .iter()
            .map(|e| {
                let mut cloud = load_labeled_csv(self.resolve(&e.path), &self.label_column)?;
                if e.apply_normalization {
                    cloud = normalize_cloud(&cloud, e.normalization)?;
                }
                Ok(EmbeddingCandidate { key: e.key(), cloud })
            })
            .collect()
    }
}

impl ManifestEntry {
    pub fn key(&self) -> CandidateKey {
        CandidateKey {
            method: self.method.clone(),
            params: self.params.clone(),
            normalization: self.normalization,
        }
    }
}

/// Profile matrix CSV: header `index,<column ids...>`, one row per index.
/// `inf` is accepted for divergent values.
pub fn read_profile_csv<R: Read>(reader: R) -> Result<IndexProfileMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut cells = rec.iter();
        row_ids.push(cells.next().unwrap_or_default().to_string());
        for (c, cell) in cells.enumerate() {
            let v = parse_special(cell).ok_or_else(|| Error::Parse {
                line: i + 2,
                column: column_ids.get(c).cloned().unwrap_or_default(),
                message: format!("`{cell}` is not a number"),
            })?;
            values.push(v);
        }
    }
    IndexProfileMatrix::new(row_ids, column_ids, values)
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

/// Long format: one line per candidate and index.
pub fn write_report_csv<W: Write>(report: &EvaluationReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "method", "params", "normalization", "index", "value", "flag", "null_mean", "null_se", "p",
        "p_bh", "best",
    ])?;
    for row in &report.candidates {
        let params: Vec<String> = row.key.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        for (id, score) in &row.scores {
            let best = report.best_per_index.get(id).is_some_and(|b| b.contains(&row.key));
            let null = row.null.get(id);
            let opt = |f: fn(&crate::harness::NullEntry) -> f64| null.map(|n| fmt_f64(f(n))).unwrap_or_default();
            let flag = score
                .flag
                .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
                .unwrap_or_default();
            w.write_record([
                row.key.method.clone(),
                params.join(";"),
                row.key.normalization.to_string(),
                id.to_string(),
                fmt_f64(score.value),
                flag,
                opt(|n| n.summary.null_mean),
                opt(|n| n.summary.null_se),
                opt(|n| n.summary.p_value),
                opt(|n| n.p_bh),
                best.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_similarity_csv<W: Write>(map: &SimilarityMap, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "pc1", "pc2", "in_psi_triangle"])?;
    for p in &map.points {
        w.write_record([p.index.clone(), fmt_f64(p.pc1), fmt_f64(p.pc2), p.in_psi_triangle.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
