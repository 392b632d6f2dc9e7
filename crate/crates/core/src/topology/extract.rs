use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::merge_tree::{MergeTree, TreeNode};
use super::FiltrationConfig;
use crate::error::{Error, Result};
use crate::field::PotentialField;
use crate::points::Points;
use crate::scalar::{squared_distance, total_cmp, Scalar};

/// Positions closer than this are treated as the same centroid.
const DEDUP_TOL: f64 = 1e-9;

/// Which tier of the selection chain produced a centroid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Leaf of a sweep that ended with at least `n_clusters` live leaves.
    PersistentLeaf,
    /// Leaf that never merged during the processed range.
    IsolatedPath,
    /// Leaf that merged, ranked by accumulated energy.
    TopEnergyLeaf,
    /// Raw probe, ranked by energy.
    TopEnergyProbe,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::PersistentLeaf,
        Provenance::IsolatedPath,
        Provenance::TopEnergyLeaf,
        Provenance::TopEnergyProbe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::PersistentLeaf => "persistent_leaf",
            Provenance::IsolatedPath => "isolated_path",
            Provenance::TopEnergyLeaf => "top_energy_leaf",
            Provenance::TopEnergyProbe => "top_energy_probe",
        }
    }
}

/// Exactly `n_clusters` centroids with the tier each came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalCentroids<T> {
    pub centroids: Points<T>,
    pub provenance: Vec<Provenance>,
}

impl<T> GlobalCentroids<T> {
    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == tag).count()
    }
}

struct Selection<T> {
    rows: Vec<Vec<T>>,
    tags: Vec<Provenance>,
    tol_sq: T,
}

impl<T: Scalar> Selection<T> {
    fn full(&self, n: usize) -> bool {
        self.rows.len() >= n
    }

    /// Adds `position` unless an already chosen centroid sits on it.
    fn offer(&mut self, position: &[T], tag: Provenance) -> bool {
        if self
            .rows
            .iter()
            .any(|r| squared_distance(r, position) <= self.tol_sq)
        {
            return false;
        }
        self.rows.push(position.to_vec());
        self.tags.push(tag);
        true
    }
}

/// Orders leaves by persistence: undying first, then longer-lived, then lower seed probe.
fn by_persistence<T: Scalar>(a: &TreeNode<T>, b: &TreeNode<T>, end: T) -> Ordering {
    b.is_alive()
        .cmp(&a.is_alive())
        .then_with(|| total_cmp(&b.persistence(end), &a.persistence(end)))
        .then(a.seed_probe.cmp(&b.seed_probe))
}

/// Selects exactly `cfg.n_clusters` global centroids from a merge tree.
///
/// When the sweep ended with enough live leaves, those leaves are ranked by
/// persistence. Otherwise leaves that never merged come first, then the
/// remaining leaves by total energy, then the highest-energy probes. Positions
/// within `1e-9` of a chosen centroid are skipped. If the field has fewer
/// distinct probe positions than `n_clusters`, the highest-energy probes are
/// repeated to fill the quota.
pub fn extract_centroids<T: Scalar>(
    tree: &MergeTree<T>,
    field: &PotentialField<T>,
    cfg: &FiltrationConfig,
) -> Result<GlobalCentroids<T>> {
    cfg.validate()?;
    if field.is_empty() {
        return Err(Error::Empty("potential field"));
    }
    let n = cfg.n_clusters;
    let end = tree.final_threshold();
    let mut leaves: Vec<&TreeNode<T>> = tree.leaves().collect();
    leaves.sort_by(|a, b| by_persistence(a, b, end));

    let tol = T::of(DEDUP_TOL);
    let mut sel = Selection {
        rows: Vec::with_capacity(n),
        tags: Vec::with_capacity(n),
        tol_sq: tol * tol,
    };

    if tree.active_leaf_count() >= n {
        for leaf in &leaves {
            if sel.full(n) {
                break;
            }
            sel.offer(&leaf.centroid, Provenance::PersistentLeaf);
        }
    } else {
        for leaf in leaves.iter().filter(|l| l.is_alive()) {
            if sel.full(n) {
                break;
            }
            sel.offer(&leaf.centroid, Provenance::IsolatedPath);
        }
        let mut dying: Vec<&TreeNode<T>> =
            leaves.iter().copied().filter(|l| !l.is_alive()).collect();
        dying.sort_by(|a, b| {
            total_cmp(&b.total_energy, &a.total_energy).then(a.seed_probe.cmp(&b.seed_probe))
        });
        for leaf in dying {
            if sel.full(n) {
                break;
            }
            sel.offer(&leaf.centroid, Provenance::TopEnergyLeaf);
        }
    }

    if !sel.full(n) {
        let mut probes: Vec<usize> = (0..field.len()).collect();
        probes.sort_by(|&a, &b| total_cmp(&field.energies[b], &field.energies[a]).then(a.cmp(&b)));
        for &p in &probes {
            if sel.full(n) {
                break;
            }
            sel.offer(field.probes.row(p), Provenance::TopEnergyProbe);
        }
        // Fewer distinct positions than requested centroids.
        for &p in probes.iter().cycle() {
            if sel.full(n) {
                break;
            }
            sel.rows.push(field.probes.row(p).to_vec());
            sel.tags.push(Provenance::TopEnergyProbe);
        }
    }

    sel.rows.truncate(n);
    sel.tags.truncate(n);
    Ok(GlobalCentroids {
        centroids: Points::from_rows(&sel.rows)?,
        provenance: sel.tags,
    })
}
