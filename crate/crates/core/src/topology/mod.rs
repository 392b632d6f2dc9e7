//! Zero-dimensional persistence of the potential field.
//!
//! Probes are swept by energy (highest first for superlevel sets), joined into
//! components whenever they lie within a fixed radius of each other, and the
//! births and merges of those components are recorded in a merge tree. Leaves
//! of the tree are the candidate global centroids.

mod extract;
mod merge_tree;
mod neighbors;
mod union_find;

use serde::{Deserialize, Serialize};

pub use extract::{extract_centroids, GlobalCentroids, Provenance};
pub use merge_tree::{build_merge_tree, energy_weighted_centroid, MergeTree, TreeNode};
pub use union_find::UnionFind;

use crate::error::{Error, Result};
use crate::field::compute_bounds;
use crate::local::WeightedCentroid;
use crate::points::Points;
use crate::scalar::{distance, total_cmp, Scalar};

/// Order in which energy thresholds are swept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Active set `{E >= h}`, `h` decreasing from the maximum energy.
    #[default]
    Superlevel,
    /// Active set `{E <= h}`, `h` increasing from the minimum energy.
    Sublevel,
}

impl Direction {
    /// Whether `energy` belongs to the active set at threshold `h`.
    #[inline]
    pub fn admits<T: Scalar>(self, energy: T, h: T) -> bool {
        match self {
            Direction::Superlevel => energy >= h,
            Direction::Sublevel => energy <= h,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiltrationConfig {
    /// Number of global centroids to produce.
    pub n_clusters: usize,
    /// Probes within this Euclidean distance are adjacent.
    pub radius: f64,
    /// Cap on the number of thresholds swept.
    pub max_levels: usize,
    pub direction: Direction,
}

impl FiltrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(Error::InvalidInput("n_clusters must be at least 1".into()));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidInput("max_levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Thresholds in sweep order.
///
/// The distinct energy values are used directly when there are at most
/// `level_count` of them; otherwise `level_count` evenly spaced quantiles of
/// the distinct values are taken, always including both extremes.
pub fn threshold_sequence<T: Scalar>(
    energies: &[T],
    level_count: usize,
    direction: Direction,
) -> Vec<T> {
    let mut distinct: Vec<T> = energies.iter().copied().filter(|e| !e.is_nan()).collect();
    distinct.sort_by(total_cmp);
    distinct.dedup();
    if direction == Direction::Superlevel {
        distinct.reverse();
    }
    let m = distinct.len();
    if m <= level_count || m == 0 {
        return distinct;
    }
    if level_count <= 1 {
        return distinct.into_iter().take(level_count).collect();
    }
    (0..level_count)
        .map(|i| {
            let pos = (i as f64 * (m - 1) as f64 / (level_count - 1) as f64).round() as usize;
            distinct[pos.min(m - 1)]
        })
        .collect()
}

/// Partition of `indices` into maximal sets connected under
/// `|p_a - p_b| <= radius`. Each component is sorted; components are ordered
/// by their smallest member.
pub fn connected_components<T: Scalar>(
    indices: &[usize],
    positions: &Points<T>,
    radius: T,
) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(indices.len());
    let mut index = neighbors::RadiusIndex::new(positions, radius);
    let mut slot = std::collections::HashMap::with_capacity(indices.len());
    for (s, &i) in indices.iter().enumerate() {
        slot.insert(i, s);
    }
    for (s, &i) in indices.iter().enumerate() {
        index.for_each_neighbor(i, |q| {
            uf.union(s, slot[&q]);
        });
        index.insert(i);
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for (s, &i) in indices.iter().enumerate() {
        groups.entry(uf.find(s)).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups
        .into_values()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// First percentile (nearest rank) of the non-zero pairwise distances between
/// source positions. With fewer than two distinct positions the radius falls
/// back to `1e-3` times the diagonal of the sources' bounding box.
pub fn radius_heuristic<T: Scalar>(sources: &[WeightedCentroid<T>]) -> Result<T> {
    let mut dists: Vec<T> = Vec::with_capacity(sources.len() * sources.len().saturating_sub(1) / 2);
    for (i, a) in sources.iter().enumerate() {
        for b in &sources[i + 1..] {
            let d = distance(&a.position, &b.position);
            if d > T::zero() {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Ok(T::of(1e-3) * compute_bounds(sources)?.diagonal());
    }
    let rank = ((0.01 * dists.len() as f64).ceil() as usize).max(1);
    let (_, nth, _) = dists.select_nth_unstable_by(rank - 1, total_cmp);
    Ok(*nth)
}
