//! Scores embedding candidates, picks the best tuning parameters per index,
//! adjusts p-values across each method's parameter grid and builds the
//! AVG-rank table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Better, IndexId, IndexScore, LabeledPointCloud};
use crate::psi::CentroidMode;
use crate::scoring::Scorer;
use crate::seed::derive_seed;
use crate::significance::{bh_adjust, NullModelSummary};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Relative tolerance under which two index values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Normalization {
    #[default]
    Non,
    /// Rows divided by their sums.
    Drs,
    /// Columns divided by their sums.
    Dcs,
    /// `log10(x + 1)`.
    Log,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Non => "NON",
            Normalization::Drs => "DRS",
            Normalization::Dcs => "DCS",
            Normalization::Log => "LOG",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NON" | "NONE" => Ok(Normalization::Non),
            "DRS" => Ok(Normalization::Drs),
            "DCS" => Ok(Normalization::Dcs),
            "LOG" => Ok(Normalization::Log),
            _ => Err(Error::InvalidArgument(format!("unknown normalization `{s}`"))),
        }
    }
}

/// Applies `scheme` to a row-major matrix with `n_cols` columns.
pub fn normalize(data: &[f64], n_cols: usize, scheme: Normalization) -> Result<Vec<f64>> {
    if n_cols == 0 || !data.len().is_multiple_of(n_cols) {
        return Err(Error::Shape(format!("{} values do not form rows of {n_cols}", data.len())));
    }
    let mut out = data.to_vec();
    match scheme {
        Normalization::Non => {}
        Normalization::Drs => {
            for (r, row) in out.chunks_exact_mut(n_cols).enumerate() {
                let s: f64 = row.iter().sum();
                if s == 0.0 {
                    return Err(Error::ZeroSum { axis: "row", index: r });
                }
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Normalization::Dcs => {
            let mut sums = vec![0.0; n_cols];
            for row in out.chunks_exact(n_cols) {
                sums.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
            if let Some(c) = sums.iter().position(|&s| s == 0.0) {
                return Err(Error::ZeroSum { axis: "column", index: c });
            }
            for row in out.chunks_exact_mut(n_cols) {
                row.iter_mut().zip(&sums).for_each(|(v, s)| *v /= s);
            }
        }
        Normalization::Log => {
            for (i, v) in out.iter_mut().enumerate() {
                if *v < 0.0 {
                    return Err(Error::NegativeInputForLog {
                        row: i / n_cols,
                        column: i % n_cols,
                        value: *v,
                    });
                }
                *v = (*v + 1.0).log10();
            }
        }
    }
    Ok(out)
}

pub fn normalize_cloud(cloud: &LabeledPointCloud, scheme: Normalization) -> Result<LabeledPointCloud> {
    if scheme == Normalization::Non {
        return Ok(cloud.clone());
    }
    let coords = normalize(cloud.coords(), cloud.n_dims(), scheme)?;
    cloud.with_coords(coords, cloud.n_dims())
}

/// Identity of a candidate within one evaluation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateKey {
    pub method: String,
    pub params: BTreeMap<String, String>,
    pub normalization: Normalization,
}

impl fmt::Display for CandidateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.method)?;
        if !self.params.is_empty() {
            let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "[{}]", p.join(","))?;
        }
        write!(f, "/{}", self.normalization)
    }
}

/// One embedding awaiting scoring. The original high-dimensional data is
/// just another candidate, conventionally with method `hd`.
#[derive(Debug, Clone)]
pub struct EmbeddingCandidate {
    pub key: CandidateKey,
    pub cloud: LabeledPointCloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullEntry {
    #[serde(flatten)]
    pub summary: NullModelSummary,
    /// Benjamini-Hochberg adjusted across the method's parameter grid.
    pub p_bh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    #[serde(flatten)]
    pub key: CandidateKey,
    pub scores: BTreeMap<IndexId, IndexScore>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub null: BTreeMap<IndexId, NullEntry>,
}

impl CandidateRow {
    pub fn value(&self, index: IndexId) -> Option<f64> {
        self.scores.get(&index).map(|s| s.value)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreOptions {
    pub mode: CentroidMode,
    /// Null-model replicates per index; zero skips the null model.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { mode: CentroidMode::Median, replicates: 0, seed: 0 }
    }
}

/// Seed of the null model for one index of one candidate.
pub fn null_seed(master: u64, key: &CandidateKey, index: IndexId) -> u64 {
    derive_seed(master, &format!("candidate/{key}/null/{index}"))
}

/// Scores `indices` on the candidate and, when requested, runs each one's
/// null model. Raw p-values are copied into `p_bh` until
/// [`adjust_grid_pvalues`] runs.
pub fn score_candidate(
    candidate: &EmbeddingCandidate,
    indices: &[IndexId],
    options: &ScoreOptions,
) -> Result<CandidateRow> {
    let scorer = Scorer::new(&candidate.cloud, options.mode);
    let scores = scorer.score(indices)?.into_iter().map(|s| (s.index_id, s)).collect();
    let mut null = BTreeMap::new();
    if options.replicates > 0 {
        for &id in indices {
            let seed = null_seed(options.seed, &candidate.key, id);
            let summary = scorer.null_model(id, options.replicates, seed)?;
            let p_bh = summary.p_value;
            null.insert(id, NullEntry { summary, p_bh });
        }
    }
    Ok(CandidateRow { key: candidate.key.clone(), scores, null })
}

fn tied(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Orders values best first.
fn best_first(better: Better, a: f64, b: f64) -> std::cmp::Ordering {
    match better {
        Better::Higher => b.total_cmp(&a),
        Better::Lower => a.total_cmp(&b),
    }
}

/// Positions of every row attaining the optimum of `index`, ties included.
pub fn select_best(rows: &[CandidateRow], index: IndexId) -> Vec<usize> {
    let values: Vec<(usize, f64)> =
        rows.iter().enumerate().filter_map(|(i, r)| r.value(index).map(|v| (i, v))).collect();
    let Some(opt) = values
        .iter()
        .map(|&(_, v)| v)
        .min_by(|&a, &b| best_first(index.better(), a, b))
    else {
        return Vec::new();
    };
    values.into_iter().filter(|&(_, v)| tied(v, opt)).map(|(i, _)| i).collect()
}

/// Benjamini-Hochberg over each (method, index) family.
pub fn adjust_grid_pvalues(rows: &mut [CandidateRow]) -> Result<()> {
    let mut families: BTreeMap<(String, IndexId), Vec<usize>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        for &id in row.null.keys() {
            families.entry((row.key.method.clone(), id)).or_default().push(i);
        }
    }
    for ((_, id), members) in families {
        let raw: Vec<f64> = members.iter().map(|&i| rows[i].null[&id].summary.p_value).collect();
        for (&i, p) in members.iter().zip(bh_adjust(&raw)?) {
            if let Some(entry) = rows[i].null.get_mut(&id) {
                entry.p_bh = p;
            }
        }
    }
    Ok(())
}

/// Average ranks, rank 1 best, with ties sharing the mean of their
/// positions.
pub fn tie_averaged_ranks(values: &[f64], better: Better) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| best_first(better, values[a], values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && tied(values[order[j]], values[order[i]]) {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodBest {
    pub method: String,
    #[serde(with = "index_f64_map")]
    pub values: BTreeMap<IndexId, f64>,
}

/// Each method's best value per index across its candidates.
pub fn method_best_values(rows: &[CandidateRow], indices: &[IndexId]) -> Vec<MethodBest> {
    let mut by_method: BTreeMap<&str, Vec<&CandidateRow>> = BTreeMap::new();
    for r in rows {
        by_method.entry(r.key.method.as_str()).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, rs)| {
            let values = indices
                .iter()
                .filter_map(|&id| {
                    rs.iter()
                        .filter_map(|r| r.value(id))
                        .min_by(|&a, &b| best_first(id.better(), a, b))
                        .map(|v| (id, v))
                })
                .collect();
            MethodBest { method: method.to_string(), values }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvgRankRow {
    pub method: String,
    pub avg_rank: f64,
    pub ranks: BTreeMap<IndexId, f64>,
    #[serde(with = "index_f64_map")]
    pub values: BTreeMap<IndexId, f64>,
}

/// Ranks methods per index and averages the ranks; sorted by ascending AVG
/// rank, then by method name.
pub fn avg_rank_table(best: &[MethodBest], indices: &[IndexId]) -> Vec<AvgRankRow> {
    let mut rows: Vec<AvgRankRow> = best
        .iter()
        .map(|b| AvgRankRow {
            method: b.method.clone(),
            avg_rank: 0.0,
            ranks: BTreeMap::new(),
            values: b.values.clone(),
        })
        .collect();
    for &id in indices {
        let present: Vec<usize> = (0..best.len()).filter(|&m| best[m].values.contains_key(&id)).collect();
        let values: Vec<f64> = present.iter().map(|&m| best[m].values[&id]).collect();
        for (&m, r) in present.iter().zip(tie_averaged_ranks(&values, id.better())) {
            rows[m].ranks.insert(id, r);
        }
    }
    for row in &mut rows {
        if !row.ranks.is_empty() {
            row.avg_rank = row.ranks.values().sum::<f64>() / row.ranks.len() as f64;
        }
    }
    rows.sort_by(|a, b| a.avg_rank.total_cmp(&b.avg_rank).then_with(|| a.method.cmp(&b.method)));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub dataset: String,
    pub centroid: CentroidMode,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    pub indices: Vec<IndexId>,
    pub candidates: Vec<CandidateRow>,
    pub best_per_index: BTreeMap<IndexId, Vec<CandidateKey>>,
    pub avg_rank: Vec<AvgRankRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Scores every candidate and assembles the report. Candidates are scored
/// in parallel; rows come out sorted by key, so the report does not depend
/// on input order.
pub fn evaluate(
    dataset: &str,
    candidates: &[EmbeddingCandidate],
    indices: &[IndexId],
    options: &ScoreOptions,
    alpha: f64,
) -> Result<EvaluationReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to evaluate".into()));
    }
    let mut keys: Vec<&CandidateKey> = candidates.iter().map(|c| &c.key).collect();
    keys.sort();
    if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Manifest(format!("duplicate candidate {}", w[0])));
    }
    let mut rows: Vec<CandidateRow> = candidates
        .par_iter()
        .map(|c| score_candidate(c, indices, options))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    adjust_grid_pvalues(&mut rows)?;

    let best_per_index = indices
        .iter()
        .map(|&id| (id, select_best(&rows, id).into_iter().map(|i| rows[i].key.clone()).collect()))
        .collect();
    let avg_rank = avg_rank_table(&method_best_values(&rows, indices), indices);

    let mut notes = Vec::new();
    if rows.iter().any(|r| r.scores.values().any(|s| s.flag.is_some())) {
        notes.push(
            "flagged scores: diverged = +inf, degenerate = 0/0 guard, singleton_silhouette = \
             singleton clusters scored 0, coincident_pair = neutral triple for a pair"
                .to_string(),
        );
    }
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: dataset.to_string(),
        centroid: options.mode,
        replicates: options.replicates,
        seed: options.seed,
        alpha,
        indices: indices.to_vec(),
        candidates: rows,
        best_per_index,
        avg_rank,
        notes,
    })
}

mod index_f64_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::model::IndexId;

    pub fn serialize<S: Serializer>(m: &BTreeMap<IndexId, f64>, s: S) -> Result<S::Ok, S::Error> {
        #[derive(serde::Serialize)]
        struct V(#[serde(with = "crate::serde_f64")] f64);
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &V(*v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<IndexId, f64>, D::Error> {
        #[derive(Deserialize)]
        struct V(#[serde(with = "crate::serde_f64")] f64);
        let m: BTreeMap<IndexId, V> = BTreeMap::deserialize(d)?;
        Ok(m.into_iter().map(|(k, V(v))| (k, v)).collect())
    }
}
