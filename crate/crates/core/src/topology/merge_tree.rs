use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::neighbors::RadiusIndex;
use super::{threshold_sequence, Direction, FiltrationConfig, UnionFind};
use crate::error::{Error, Result};
use crate::field::PotentialField;
use crate::scalar::{total_cmp, Scalar};

/// One component of the filtration, from its birth until it merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode<T> {
    pub node_id: usize,
    pub birth_threshold: T,
    pub death_threshold: Option<T>,
    /// Index into [`MergeTree::thresholds`] of the birth level.
    pub birth_level: usize,
    pub death_level: Option<usize>,
    /// Energy-weighted mean of the members present at birth.
    pub centroid: Vec<T>,
    /// Energy summed over every member, up to death or the end of the sweep.
    pub total_energy: T,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    /// Probes that joined this component directly while it was active,
    /// excluding those inherited from children.
    pub own_members: Vec<usize>,
    /// First member to activate; used for tie-breaking.
    pub seed_probe: usize,
}

impl<T: Scalar> TreeNode<T> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_alive(&self) -> bool {
        self.death_threshold.is_none()
    }

    /// `|death - birth|`, or `|final - birth|` for a component still alive
    /// when the sweep ended at threshold `final_threshold`.
    pub fn persistence(&self, final_threshold: T) -> T {
        (self.death_threshold.unwrap_or(final_threshold) - self.birth_threshold).abs()
    }
}

/// Birth/merge history of the components of a filtration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeTree<T> {
    pub nodes: Vec<TreeNode<T>>,
    /// Full threshold sequence; only the first `levels_processed` were swept.
    pub thresholds: Vec<T>,
    pub levels_processed: usize,
    /// Level at which each probe entered the active set, if it did.
    pub activation_level: Vec<Option<usize>>,
    pub direction: Direction,
    /// Whether the sweep stopped because enough active leaves existed.
    pub early_stopped: bool,
}

impl<T: Scalar> MergeTree<T> {
    /// Last threshold actually swept.
    pub fn final_threshold(&self) -> T {
        self.thresholds[self.levels_processed - 1]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode<T>> + '_ {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn active_leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.is_leaf() && n.is_alive())
            .count()
    }

    /// Every probe in the subtree of `node`, sorted.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            out.extend_from_slice(&n.own_members);
            stack.extend_from_slice(&n.children);
        }
        out.sort_unstable();
        out
    }

    /// Members of `node` that were active at `level`.
    pub fn members_at(&self, node: usize, level: usize) -> Vec<usize> {
        self.members(node)
            .into_iter()
            .filter(|&p| self.activation_level[p].is_some_and(|a| a <= level))
            .collect()
    }

    /// Nodes alive at `level`.
    pub fn alive_at(&self, level: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.birth_level <= level && n.death_level.is_none_or(|d| d > level))
            .map(|n| n.node_id)
            .collect()
    }

    /// Component partition of the active probes at `level`, reconstructed from
    /// the tree. Components are sorted and ordered by smallest member.
    pub fn components_at(&self, level: usize) -> Vec<Vec<usize>> {
        let mut comps: Vec<Vec<usize>> = self
            .alive_at(level)
            .into_iter()
            .map(|n| self.members_at(n, level))
            .collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }
}

struct Builder<'a, T> {
    field: &'a PotentialField<T>,
    nodes: Vec<TreeNode<T>>,
    /// Running energy-weighted coordinate sum and energy sum per node (subtree).
    weighted: Vec<(Vec<T>, T)>,
}

impl<T: Scalar> Builder<'_, T> {
    fn add_members(&mut self, node: usize, probes: &[usize]) {
        let (sum, mass) = &mut self.weighted[node];
        for &p in probes {
            let e = self.field.energies[p];
            for (s, &x) in sum.iter_mut().zip(self.field.probes.row(p)) {
                *s = *s + e * x;
            }
            *mass = *mass + e;
        }
        let n = &mut self.nodes[node];
        n.own_members.extend_from_slice(probes);
        n.total_energy = *mass;
    }

    fn centroid_of(&self, node: usize, fallback: &[usize]) -> Vec<T> {
        let (sum, mass) = &self.weighted[node];
        if *mass > T::zero() {
            sum.iter().map(|&s| s / *mass).collect()
        } else {
            // All-zero energies: plain mean of the new members.
            let sel = self.field.probes.select(fallback);
            sel.mean().unwrap_or_else(|| sum.clone())
        }
    }

    fn new_node(&mut self, h: T, level: usize, seed: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            node_id: id,
            birth_threshold: h,
            death_threshold: None,
            birth_level: level,
            death_level: None,
            centroid: Vec::new(),
            total_energy: T::zero(),
            children: Vec::new(),
            parent: None,
            own_members: Vec::new(),
            seed_probe: seed,
        });
        self.weighted
            .push((vec![T::zero(); self.field.probes.dim()], T::zero()));
        id
    }
}

/// Sweeps the thresholds of `field` and records component births and merges.
///
/// At each level the newly admitted probes are linked to every active probe
/// within `cfg.radius`. A component with no previous history is born as a
/// leaf; a component that swallowed two or more earlier components is born as
/// their parent and those children die at this level. The sweep stops early
/// once at least `cfg.n_clusters` leaves are simultaneously alive.
pub fn build_merge_tree<T: Scalar>(
    field: &PotentialField<T>,
    cfg: &FiltrationConfig,
) -> Result<MergeTree<T>> {
    cfg.validate()?;
    let m = field.len();
    if m == 0 {
        return Err(Error::Empty("potential field"));
    }
    let thresholds = threshold_sequence(&field.energies, cfg.max_levels, cfg.direction);
    if thresholds.is_empty() {
        return Err(Error::NonFinite("field energies"));
    }

    // Probes in admission order: by energy in sweep direction, then index.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let by_energy = total_cmp(&field.energies[a], &field.energies[b]);
        let by_energy = match cfg.direction {
            Direction::Superlevel => by_energy.reverse(),
            Direction::Sublevel => by_energy,
        };
        by_energy.then(a.cmp(&b))
    });

    let mut builder = Builder {
        field,
        nodes: Vec::new(),
        weighted: Vec::new(),
    };
    let mut uf = UnionFind::new(m);
    let mut index = RadiusIndex::new(&field.probes, T::of(cfg.radius));
    let mut activation: Vec<Option<usize>> = vec![None; m];
    // Node currently representing the component rooted at each union-find root.
    let mut comp_node: Vec<usize> = vec![usize::MAX; m];
    let mut cursor = 0;
    let mut active_leaves = 0usize;
    let mut levels_processed = 0;
    let mut early_stopped = false;

    for (level, &h) in thresholds.iter().enumerate() {
        let start = cursor;
        while cursor < m && cfg.direction.admits(field.energies[order[cursor]], h) {
            activation[order[cursor]] = Some(level);
            cursor += 1;
        }
        let fresh = &order[start..cursor];

        // Record which pre-existing nodes each fresh probe touches before any
        // union at this level changes the roots.
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut touched: Vec<(usize, usize)> = Vec::new();
        for &p in fresh {
            index.insert(p);
        }
        for &p in fresh {
            index.for_each_neighbor(p, |q| {
                match activation[q] {
                    Some(a) if a < level => touched.push((p, comp_node[uf.find(q)])),
                    _ => {}
                }
                edges.push((p, q));
            });
        }
        for &(a, b) in &edges {
            uf.union(a, b);
        }

        // Group fresh probes and touched nodes by their new root, in admission order.
        let mut group_of_root: std::collections::HashMap<usize, usize> =
            std::collections::HashMap::new();
        let mut groups: Vec<(Vec<usize>, BTreeSet<usize>)> = Vec::new();
        for &p in fresh {
            let root = uf.find(p);
            let g = *group_of_root.entry(root).or_insert_with(|| {
                groups.push((Vec::new(), BTreeSet::new()));
                groups.len() - 1
            });
            groups[g].0.push(p);
        }
        for &(p, node) in &touched {
            let g = group_of_root[&uf.find(p)];
            groups[g].1.insert(node);
        }

        for (fresh_members, previous) in groups {
            let root = uf.find(fresh_members[0]);
            let node = match previous.len() {
                0 => {
                    let id = builder.new_node(h, level, fresh_members[0]);
                    builder.add_members(id, &fresh_members);
                    builder.nodes[id].centroid = builder.centroid_of(id, &fresh_members);
                    active_leaves += 1;
                    id
                }
                1 => {
                    let id = *previous.iter().next().expect("one node");
                    builder.add_members(id, &fresh_members);
                    id
                }
                _ => {
                    let children: Vec<usize> = previous.into_iter().collect();
                    let seed = children
                        .iter()
                        .map(|&c| builder.nodes[c].seed_probe)
                        .min_by_key(|&s| (activation[s], order_rank(&order, s)))
                        .expect("children");
                    let id = builder.new_node(h, level, seed);
                    let dim = field.probes.dim();
                    let mut sum = vec![T::zero(); dim];
                    let mut mass = T::zero();
                    for &c in &children {
                        let child = &mut builder.nodes[c];
                        child.death_threshold = Some(h);
                        child.death_level = Some(level);
                        child.parent = Some(id);
                        if child.children.is_empty() {
                            active_leaves -= 1;
                        }
                        let (cs, cm) = &builder.weighted[c];
                        for d in 0..dim {
                            sum[d] = sum[d] + cs[d];
                        }
                        mass = mass + *cm;
                    }
                    builder.weighted[id] = (sum, mass);
                    builder.nodes[id].total_energy = mass;
                    builder.nodes[id].children = children;
                    builder.add_members(id, &fresh_members);
                    builder.nodes[id].centroid = builder.centroid_of(id, &fresh_members);
                    id
                }
            };
            comp_node[root] = node;
        }

        levels_processed = level + 1;
        if active_leaves >= cfg.n_clusters {
            early_stopped = true;
            break;
        }
    }

    Ok(MergeTree {
        nodes: builder.nodes,
        thresholds,
        levels_processed,
        activation_level: activation,
        direction: cfg.direction,
        early_stopped,
    })
}

/// `sum E(g) g / sum E(g)` over `members`.
pub fn energy_weighted_centroid<T: Scalar>(field: &PotentialField<T>, members: &[usize]) -> Vec<T> {
    let dim = field.probes.dim();
    let mut sum = vec![T::zero(); dim];
    let mut mass = T::zero();
    for &p in members {
        let e = field.energies[p];
        for (s, &x) in sum.iter_mut().zip(field.probes.row(p)) {
            *s = *s + e * x;
        }
        mass = mass + e;
    }
    sum.iter().map(|&s| s / mass).collect()
}

fn order_rank(order: &[usize], probe: usize) -> usize {
    order.iter().position(|&p| p == probe).unwrap_or(usize::MAX)
}
