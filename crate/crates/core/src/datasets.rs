//! Synthetic data and subsampling.

use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::LabeledPointCloud;
use crate::seed::derive_seed;

/// Swiss roll cut into arcs along its spiral parameter.
///
/// Points are `(t cos t, h, t sin t)` with `t` in `[t_min, t_max]` and `h`
/// in `[0, height]`. The `t` range is split into `n_arcs` equal bands with a
/// gap of `gap_fraction * (t_max - t_min)` between consecutive bands.
#[derive(Debug, Clone, PartialEq)]
pub struct SwissRollSpec {
    pub n_points: usize,
    pub n_arcs: usize,
    pub gap_fraction: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub t_min: f64,
    pub t_max: f64,
    pub height: f64,
}

impl Default for SwissRollSpec {
    fn default() -> Self {
        SwissRollSpec {
            n_points: 723,
            n_arcs: 3,
            gap_fraction: 0.1,
            noise_sd: 0.0,
            seed: 0,
            t_min: 1.5 * PI,
            t_max: 4.5 * PI,
            height: 21.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SwissRoll {
    pub cloud: LabeledPointCloud,
    /// Spiral parameter of every point (the color gradient along the roll).
    pub t: Vec<f64>,
}

impl SwissRollSpec {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_arcs < 2 {
            return bad("swiss roll needs at least 2 arcs");
        }
        if self.n_points < 2 * self.n_arcs {
            return bad("swiss roll needs at least 2 points per arc");
        }
        let total_gap = self.gap_fraction * (self.n_arcs - 1) as f64;
        if !(self.gap_fraction > 0.0 && total_gap < 1.0) {
            return bad("gap_fraction must be positive and leave room for the arcs");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and non-negative");
        }
        if !(self.t_max > self.t_min && self.height > 0.0) {
            return bad("swiss roll needs t_max > t_min and a positive height");
        }
        Ok(())
    }

    /// `[start, end)` of each arc's parameter band.
    pub fn bands(&self) -> Vec<(f64, f64)> {
        let range = self.t_max - self.t_min;
        let gap = self.gap_fraction * range;
        let width = (range - gap * (self.n_arcs - 1) as f64) / self.n_arcs as f64;
        (0..self.n_arcs)
            .map(|a| {
                let start = self.t_min + a as f64 * (width + gap);
                (start, start + width)
            })
            .collect()
    }
}

/// Arc `a` gets `n / arcs` points, the first `n % arcs` arcs one more.
fn arc_sizes(n: usize, arcs: usize) -> Vec<usize> {
    (0..arcs).map(|a| n / arcs + usize::from(a < n % arcs)).collect()
}

pub fn generate_swiss_roll(spec: &SwissRollSpec) -> Result<SwissRoll> {
    spec.check()?;
    let mut rng_t = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "swissroll/t"));
    let mut rng_h = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "swissroll/height"));
    let mut rng_noise = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "swissroll/noise"));
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut coords = Vec::with_capacity(spec.n_points * 3);
    let mut labels = Vec::with_capacity(spec.n_points);
    let mut ts = Vec::with_capacity(spec.n_points);
    for (arc, (&(lo, hi), size)) in spec.bands().iter().zip(arc_sizes(spec.n_points, spec.n_arcs)).enumerate() {
        for _ in 0..size {
            let t = rng_t.random_range(lo..hi);
            let h = rng_h.random_range(0.0..spec.height);
            let mut p = [t * t.cos(), h, t * t.sin()];
            if spec.noise_sd > 0.0 {
                p.iter_mut().for_each(|v| *v += noise.sample(&mut rng_noise));
            }
            coords.extend(p);
            labels.push(arc.to_string());
            ts.push(t);
        }
    }
    Ok(SwissRoll { cloud: LabeledPointCloud::from_flat(coords, 3, labels)?, t: ts })
}

/// Draws `per_group` rows of every group uniformly without replacement.
/// Selected rows keep their original relative order.
pub fn subsample_balanced(cloud: &LabeledPointCloud, per_group: usize, seed: u64) -> Result<LabeledPointCloud> {
    let g = cloud.grouping();
    let mut keep = Vec::with_capacity(per_group * g.n_groups());
    for group in 0..g.n_groups() {
        let members = g.members(group);
        if members.len() < per_group {
            return Err(Error::GroupTooSmall {
                label: g.name(group).to_string(),
                size: members.len(),
                requested: per_group,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("subsample/{}", g.name(group))));
        keep.extend(index::sample(&mut rng, members.len(), per_group).into_iter().map(|i| members[i]));
    }
    keep.sort_unstable();
    cloud.select(&keep)
}
