//! Client-side computation: Lloyd's k-means on privatized points and the
//! compactness mass attached to each local centroid.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ClientShard;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::privacy::{privatize, PrivacyParams};
use crate::scalar::{squared_distance, total_cmp, Scalar};

/// Above this many `n * k` distance evaluations the assignment step runs on
/// the rayon pool. The map is pure so the result does not depend on it.
const PARALLEL_ASSIGN_WORK: usize = 1 << 16;

/// Maximum number of point pairs used when estimating `sigma^2`.
pub const MAX_SIGMA_PAIRS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid displacement.
    pub tol: f64,
    pub init_seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, init_seed: u64) -> Self {
        Self {
            k,
            max_iters: 100,
            tol: 1e-9,
            init_seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult<T> {
    pub centroids: Points<T>,
    pub assignment: Vec<usize>,
    /// Inertia after each Lloyd update, one entry per iteration.
    pub inertia_history: Vec<T>,
    pub converged: bool,
}

impl<T: Scalar> KMeansResult<T> {
    pub fn inertia(&self) -> T {
        *self.inertia_history.last().expect("at least one iteration")
    }

    pub fn member_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.centroids.len()];
        for &a in &self.assignment {
            counts[a] += 1;
        }
        counts
    }
}

/// Lloyd's algorithm from a k-means++ start.
///
/// Points are processed in a canonical (lexicographic) order, so shuffling the
/// input does not change centroids; the returned assignment follows the
/// caller's order. Every returned cluster is non-empty: whenever a cluster
/// loses all members it is re-seeded at the point farthest from its current
/// centroid.
pub fn kmeans<T: Scalar>(points: &Points<T>, cfg: &KMeansConfig) -> Result<KMeansResult<T>> {
    let n = points.len();
    if cfg.k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if cfg.k > n {
        return Err(Error::TooFewPoints { k: cfg.k, n });
    }
    if !points.all_finite() {
        return Err(Error::NonFinite("k-means input"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points
            .row(a)
            .iter()
            .zip(points.row(b))
            .map(|(x, y)| total_cmp(x, y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let canonical = points.select(&order);

    let mut rng = crate::rng::seeded(cfg.init_seed);
    let mut centroids = kmeans_plus_plus(&canonical, cfg.k, &mut rng);
    let tol = T::of(cfg.tol);

    let mut history = Vec::new();
    let mut assignment = vec![0; n];
    let mut converged = false;
    for _ in 0..cfg.max_iters.max(1) {
        assignment = assign_nearest(&canonical, &centroids);
        repair_empty(&canonical, &mut centroids, &mut assignment);
        let updated = cluster_means(&canonical, &assignment, cfg.k);
        let shift = centroids
            .rows()
            .zip(updated.rows())
            .map(|(a, b)| squared_distance(a, b))
            .fold(T::zero(), T::max)
            .sqrt();
        centroids = updated;
        history.push(total_inertia(&canonical, &centroids, &assignment));
        if shift <= tol {
            converged = true;
            break;
        }
    }

    let mut restored = vec![0; n];
    for (pos, &original) in order.iter().enumerate() {
        restored[original] = assignment[pos];
    }
    Ok(KMeansResult {
        centroids,
        assignment: restored,
        inertia_history: history,
        converged,
    })
}

fn kmeans_plus_plus<T: Scalar, R: Rng>(points: &Points<T>, k: usize, rng: &mut R) -> Points<T> {
    let n = points.len();
    let mut centroids = Points::with_capacity(points.dim(), k).expect("dim >= 1");
    let first = rng.random_range(0..n);
    centroids.push(points.row(first)).expect("same dim");
    let mut nearest: Vec<T> = points
        .rows()
        .map(|p| squared_distance(p, points.row(first)))
        .collect();

    while centroids.len() < k {
        let total: f64 = nearest.iter().map(|d| d.as_f64()).sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d.as_f64();
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points.row(chosen)).expect("same dim");
        let c = centroids.row(centroids.len() - 1).to_vec();
        for (d, p) in nearest.iter_mut().zip(points.rows()) {
            *d = d.min(squared_distance(p, &c));
        }
    }
    centroids
}

/// Index of the nearest centroid; ties go to the lower index.
#[inline]
pub(crate) fn nearest_centroid<T: Scalar>(point: &[T], centroids: &Points<T>) -> (usize, T) {
    let mut best = (0, squared_distance(point, centroids.row(0)));
    for (j, c) in centroids.rows().enumerate().skip(1) {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_nearest<T: Scalar>(points: &Points<T>, centroids: &Points<T>) -> Vec<usize> {
    if points.len() * centroids.len() >= PARALLEL_ASSIGN_WORK {
        (0..points.len())
            .into_par_iter()
            .map(|i| nearest_centroid(points.row(i), centroids).0)
            .collect()
    } else {
        points
            .rows()
            .map(|p| nearest_centroid(p, centroids).0)
            .collect()
    }
}

fn repair_empty<T: Scalar>(
    points: &Points<T>,
    centroids: &mut Points<T>,
    assignment: &mut [usize],
) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        // Farthest point among clusters that can spare one.
        let donor = (0..points.len())
            .filter(|&i| counts[assignment[i]] > 1)
            .map(|i| {
                (
                    i,
                    squared_distance(points.row(i), centroids.row(assignment[i])),
                )
            })
            .fold(None, |best: Option<(usize, T)>, (i, d)| match best {
                Some((_, bd)) if d <= bd => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = donor else { break };
        counts[assignment[i]] -= 1;
        counts[empty] = 1;
        assignment[i] = empty;
        centroids.row_mut(empty).copy_from_slice(points.row(i));
    }
}

fn cluster_means<T: Scalar>(points: &Points<T>, assignment: &[usize], k: usize) -> Points<T> {
    let dim = points.dim();
    let mut sums = vec![T::zero(); k * dim];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.rows().zip(assignment) {
        counts[a] += 1;
        for (s, &x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *s = *s + x;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        let c = T::of_usize(c.max(1));
        sums[j * dim..(j + 1) * dim]
            .iter_mut()
            .for_each(|s| *s = *s / c);
    }
    Points::from_flat(dim, sums).expect("consistent buffer")
}

fn total_inertia<T: Scalar>(points: &Points<T>, centroids: &Points<T>, assignment: &[usize]) -> T {
    points
        .rows()
        .zip(assignment)
        .map(|(p, &a)| squared_distance(p, centroids.row(a)))
        .sum()
}

/// Sum of squared distances from each row to `centroid`.
pub fn inertia<'a, T: Scalar>(rows: impl IntoIterator<Item = &'a [T]>, centroid: &[T]) -> T {
    rows.into_iter()
        .map(|p| squared_distance(p, centroid))
        .sum()
}

/// How a cluster's inertia is turned into a mass in `(0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassFormula {
    /// `exp(-I / (2 sigma^2))`.
    #[default]
    Exp,
    /// `1 / (I + 1)`; ignores `sigma^2`.
    Reciprocal,
}

pub fn mass_from_inertia<T: Scalar>(inertia: T, sigma2: T, formula: MassFormula) -> Result<T> {
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sigma^2 must be positive, got {sigma2}"
        )));
    }
    if !inertia.is_finite() || inertia < T::zero() {
        return Err(Error::NonFinite("cluster inertia"));
    }
    let mass = match formula {
        MassFormula::Exp => (-inertia / (T::of(2.0) * sigma2)).exp(),
        MassFormula::Reciprocal => T::one() / (inertia + T::one()),
    };
    // exp underflows to zero for very loose clusters; masses stay strictly positive.
    Ok(mass.max(T::min_positive_value()))
}

/// Compactness mass of one cluster around `centroid`.
pub fn cluster_mass<T: Scalar>(
    cluster: &Points<T>,
    centroid: &[T],
    sigma2: T,
    formula: MassFormula,
) -> Result<T> {
    if cluster.is_empty() {
        return Err(Error::Empty("cluster"));
    }
    mass_from_inertia(inertia(cluster.rows(), centroid), sigma2, formula)
}

/// Result of estimating a shard's `sigma^2`, kept for run metadata.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Estimate<T> {
    /// Value used for mass computation (after the floor).
    pub value: T,
    /// Population variance before flooring.
    pub raw: T,
    pub pairs: usize,
    pub subsampled: bool,
    pub floored: bool,
}

/// Population variance of squared pairwise distances within a shard.
///
/// Uses every unordered pair when there are at most [`MAX_SIGMA_PAIRS`];
/// otherwise that many pairs are drawn uniformly with replacement. The result
/// is floored at `1e-9 * diag^2` where `diag` is the bounding-box diagonal.
pub fn client_sigma2<T: Scalar, R: Rng>(points: &Points<T>, rng: &mut R) -> Sigma2Estimate<T> {
    let n = points.len();
    let total_pairs = n.saturating_mul(n.saturating_sub(1)) / 2;
    let subsampled = total_pairs > MAX_SIGMA_PAIRS;
    let sq: Vec<T> = if subsampled {
        (0..MAX_SIGMA_PAIRS)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                squared_distance(points.row(i), points.row(j))
            })
            .collect()
    } else {
        let mut v = Vec::with_capacity(total_pairs);
        for i in 0..n {
            for j in i + 1..n {
                v.push(squared_distance(points.row(i), points.row(j)));
            }
        }
        v
    };

    let raw = if sq.is_empty() {
        T::zero()
    } else {
        let m = T::of_usize(sq.len());
        let mean = sq.iter().copied().sum::<T>() / m;
        sq.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / m
    };

    let floor = (T::of(1e-9) * bounding_diagonal_sq(points)).max(T::min_positive_value());
    let floored = !(raw >= floor);
    Sigma2Estimate {
        value: if floored { floor } else { raw },
        raw,
        pairs: sq.len(),
        subsampled,
        floored,
    }
}

fn bounding_diagonal_sq<T: Scalar>(points: &Points<T>) -> T {
    let dim = points.dim();
    let mut lo = vec![T::infinity(); dim];
    let mut hi = vec![T::neg_infinity(); dim];
    for p in points.rows() {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    if points.is_empty() {
        return T::zero();
    }
    squared_distance(&lo, &hi)
}

/// A local centroid and its mass: the only thing a client uploads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedCentroid<T> {
    pub position: Vec<T>,
    pub mass: T,
    pub source_client: usize,
    pub member_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientPhaseConfig {
    pub kmeans: KMeansConfig,
    /// Replaces the per-shard `sigma^2` estimate when set.
    pub sigma2_override: Option<f64>,
    pub mass_formula: MassFormula,
}

#[derive(Clone, Debug)]
pub struct ClientUpload<T> {
    pub client_id: usize,
    pub centroids: Vec<WeightedCentroid<T>>,
    pub sigma2: Sigma2Estimate<T>,
}

/// Privatize a shard, cluster it, and weigh each local centroid.
///
/// `rng` drives the Laplace noise and, for large shards, the `sigma^2` pair
/// subsample; k-means draws from `cfg.kmeans.init_seed`.
pub fn client_phase<T: Scalar, R: Rng>(
    shard: &ClientShard<T>,
    privacy: &PrivacyParams<T>,
    cfg: &ClientPhaseConfig,
    rng: &mut R,
) -> Result<ClientUpload<T>> {
    if cfg.kmeans.k > shard.points.len() {
        return Err(Error::TooFewPoints {
            k: cfg.kmeans.k,
            n: shard.points.len(),
        });
    }
    let noisy = privatize(shard, privacy, rng)?;
    let result = kmeans(&noisy.points, &cfg.kmeans)?;

    let sigma2 = match cfg.sigma2_override {
        Some(s) => {
            let value = T::of(s);
            Sigma2Estimate {
                value,
                raw: value,
                pairs: 0,
                subsampled: false,
                floored: false,
            }
        }
        None => client_sigma2(&noisy.points, rng),
    };

    let k = result.centroids.len();
    let mut inertias = vec![T::zero(); k];
    let mut counts = vec![0usize; k];
    for (p, &a) in noisy.points.rows().zip(&result.assignment) {
        inertias[a] = inertias[a] + squared_distance(p, result.centroids.row(a));
        counts[a] += 1;
    }
    let centroids = (0..k)
        .map(|j| {
            Ok(WeightedCentroid {
                position: result.centroids.row(j).to_vec(),
                mass: mass_from_inertia(inertias[j], sigma2.value, cfg.mass_formula)?,
                source_client: shard.client_id,
                member_count: counts[j],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ClientUpload {
        client_id: shard.client_id,
        centroids,
        sigma2,
    })
}

/// Wire format of a single client upload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UploadMessage<T> {
    pub client_id: usize,
    pub centroids: Vec<WireCentroid<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireCentroid<T> {
    pub position: Vec<T>,
    pub mass: T,
    pub member_count: usize,
}

impl<T: Scalar> ClientUpload<T> {
    pub fn to_message(&self) -> UploadMessage<T> {
        UploadMessage {
            client_id: self.client_id,
            centroids: self
                .centroids
                .iter()
                .map(|c| WireCentroid {
                    position: c.position.clone(),
                    mass: c.mass,
                    member_count: c.member_count,
                })
                .collect(),
        }
    }
}

impl<T: Scalar> UploadMessage<T> {
    pub fn into_centroids(self) -> Vec<WeightedCentroid<T>> {
        let client = self.client_id;
        self.centroids
            .into_iter()
            .map(|c| WeightedCentroid {
                position: c.position,
                mass: c.mass,
                source_client: client,
                member_count: c.member_count,
            })
            .collect()
    }
}
