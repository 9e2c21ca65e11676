//! Group separability of labeled points in an embedding space.
//!
//! Provides the projection separability indices (PSI-P, PSI-ROC, PSI-PR),
//! six cluster validity baselines, a label-permutation null model, a
//! harness that ranks embedding candidates, and the index-similarity map.

pub mod cli;
pub mod cvi;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod psi;
pub mod scoring;
pub mod seed;
pub(crate) mod serde_f64;
pub mod significance;
pub mod similarity;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Better, Bounds, Grouping, IndexId, IndexScore, LabeledPointCloud, ScoreFlag};
pub use psi::{CentroidMode, PsiResult};
pub use scoring::Scorer;
pub use significance::NullModelSummary;
