//! Evaluates any of the nine indices on a cloud under its own or a permuted
//! grouping.

use std::sync::OnceLock;

use crate::cvi::{self, Guarded, PairwiseDistances};
use crate::error::Result;
use crate::model::{Grouping, IndexId, IndexScore, LabeledPointCloud, ScoreFlag};
use crate::psi::{psi_with_grouping, CentroidMode, PsiResult};
use crate::significance::{permutation_null, NullModelSummary};

pub struct Scorer<'a> {
    cloud: &'a LabeledPointCloud,
    mode: CentroidMode,
    distances: OnceLock<PairwiseDistances>,
}

impl<'a> Scorer<'a> {
    pub fn new(cloud: &'a LabeledPointCloud, mode: CentroidMode) -> Self {
        Scorer { cloud, mode, distances: OnceLock::new() }
    }

    pub fn cloud(&self) -> &LabeledPointCloud {
        self.cloud
    }

    /// Built on first use by a distance-based index.
    pub fn distances(&self) -> &PairwiseDistances {
        self.distances.get_or_init(|| PairwiseDistances::new(self.cloud))
    }

    pub fn psi(&self, grouping: &Grouping) -> Result<PsiResult> {
        psi_with_grouping(self.cloud, grouping, self.mode)
    }

    pub fn value(&self, index: IndexId, grouping: &Grouping) -> Result<Guarded> {
        let c = self.cloud;
        let g = match index {
            IndexId::PsiP | IndexId::PsiRoc | IndexId::PsiPr => {
                return Ok(psi_value(index, &self.psi(grouping)?));
            }
            IndexId::Sh => cvi::silhouette_with(self.distances(), grouping),
            IndexId::Ch => cvi::calinski_harabasz_with(c, grouping),
            IndexId::Dn => cvi::dunn_with(c, self.distances(), grouping),
            IndexId::Bz => cvi::bezdek_with(c, self.distances(), grouping),
            IndexId::DbStar => cvi::davies_bouldin_with(c, grouping).1,
            IndexId::Th => Guarded {
                value: cvi::thornton_with(self.distances(), grouping),
                flag: None,
            },
        };
        Ok(g)
    }

    /// Scores on the cloud's own labels, in the order given. The PSI triple
    /// is computed once when several PSI indices are requested.
    pub fn score(&self, indices: &[IndexId]) -> Result<Vec<IndexScore>> {
        let grouping = self.cloud.grouping();
        let psi = if indices.iter().any(|i| i.is_psi()) {
            Some(self.psi(grouping)?)
        } else {
            None
        };
        indices
            .iter()
            .map(|&id| {
                let g = match &psi {
                    Some(p) if id.is_psi() => psi_value(id, p),
                    _ => self.value(id, grouping)?,
                };
                Ok(IndexScore::new(id, g.value, g.flag))
            })
            .collect()
    }

    pub fn null_model(&self, index: IndexId, replicates: usize, seed: u64) -> Result<NullModelSummary> {
        let mut s = permutation_null(self.cloud, index.better(), replicates, seed, |g| {
            Ok(self.value(index, g)?.value)
        })?;
        s.index_id = Some(index);
        Ok(s)
    }
}

fn psi_value(index: IndexId, psi: &PsiResult) -> Guarded {
    let value = match index {
        IndexId::PsiP => psi.psi_p,
        IndexId::PsiRoc => psi.psi_roc,
        IndexId::PsiPr => psi.psi_pr,
        _ => unreachable!("not a PSI index"),
    };
    Guarded { value, flag: psi.any_coincident().then_some(ScoreFlag::CoincidentPair) }
}
