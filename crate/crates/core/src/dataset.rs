//! Datasets, synthetic blobs, CSV ingestion and the cluster-based non-IID
//! split of a dataset across simulated clients.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{kmeans, KMeansConfig};
use crate::points::Points;
use crate::rng::{derive_seed, seeded};
use crate::scalar::{squared_distance, Scalar};

/// Points in `R^d` with optional dense ground-truth labels in `[0, n_classes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub points: Points<T>,
    pub labels: Option<Vec<usize>>,
    /// Generating centers for synthetic data, indexed by label.
    pub reference_centers: Option<Points<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(points: Points<T>, labels: Option<Vec<usize>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::LengthMismatch {
                    left: points.len(),
                    right: l.len(),
                });
            }
        }
        Ok(Self {
            points,
            labels,
            reference_centers: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Number of classes, i.e. one past the largest label.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |&m| m + 1))
    }

    /// Maps the data isotropically into `[-1/2, 1/2]^d`: each coordinate is
    /// centered on its midrange and all are divided by the largest range.
    /// Reference centers receive the same transform.
    pub fn normalized(&self) -> (Self, Normalization<T>) {
        let norm = Normalization::fit(&self.points);
        let mut points = self.points.clone();
        points.rows_mut().for_each(|r| norm.apply(r));
        let reference_centers = self.reference_centers.as_ref().map(|c| {
            let mut c = c.clone();
            c.rows_mut().for_each(|r| norm.apply(r));
            c
        });
        (
            Self {
                points,
                labels: self.labels.clone(),
                reference_centers,
            },
            norm,
        )
    }
}

/// Affine map `x -> (x - center) / scale` fitted by [`Dataset::normalized`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization<T> {
    pub center: Vec<T>,
    pub scale: T,
}

impl<T: Scalar> Normalization<T> {
    fn fit(points: &Points<T>) -> Self {
        let dim = points.dim();
        let mut lo = vec![T::infinity(); dim];
        let mut hi = vec![T::neg_infinity(); dim];
        for p in points.rows() {
            for d in 0..dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let half = T::of(0.5);
        let center = lo.iter().zip(&hi).map(|(&l, &h)| (l + h) * half).collect();
        let range = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| h - l)
            .fold(T::zero(), T::max);
        let scale = if range > T::zero() { range } else { T::one() };
        Self { center, scale }
    }

    pub fn apply(&self, row: &mut [T]) {
        for (x, &c) in row.iter_mut().zip(&self.center) {
            *x = (*x - c) / self.scale;
        }
    }
}

/// Isotropic Gaussian blobs with pairwise center separation of at least
/// `separation`. Labels follow the generating cluster.
pub fn generate_blobs<T: Scalar>(
    n_clusters: usize,
    points_per_cluster: usize,
    d: usize,
    spread: f64,
    separation: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n_clusters < 1 || points_per_cluster < 1 || d < 1 {
        return Err(Error::InvalidInput(format!(
            "blob counts must be positive (clusters={n_clusters}, per_cluster={points_per_cluster}, d={d})"
        )));
    }
    if !(spread > 0.0) || !(separation > 0.0) {
        return Err(Error::InvalidInput(
            "spread and separation must be positive".into(),
        ));
    }
    let mut rng = seeded(seed);
    let centers = place_centers(n_clusters, d, separation, &mut rng);

    let mut points = Points::with_capacity(d, n_clusters * points_per_cluster)?;
    let mut labels = Vec::with_capacity(n_clusters * points_per_cluster);
    let mut row = vec![T::zero(); d];
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..points_per_cluster {
            for (x, &c) in row.iter_mut().zip(center) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = T::of(c + spread * z);
            }
            points.push(&row)?;
            labels.push(label);
        }
    }
    let reference: Vec<Vec<T>> = centers
        .iter()
        .map(|c| c.iter().map(|&x| T::of(x)).collect())
        .collect();
    Ok(Dataset {
        points,
        labels: Some(labels),
        reference_centers: Some(Points::from_rows(&reference)?),
    })
}

fn place_centers<R: Rng>(
    n_clusters: usize,
    d: usize,
    separation: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let per_axis = (n_clusters as f64).powf(1.0 / d as f64).ceil().max(1.0);
    let mut side = 2.0 * separation * per_axis;
    let min_sq = separation * separation;
    loop {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n_clusters);
        let mut attempts = 0;
        while centers.len() < n_clusters && attempts < 10_000 {
            attempts += 1;
            let c: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * side).collect();
            if centers.iter().all(|o| squared_distance(o, &c) >= min_sq) {
                centers.push(c);
            }
        }
        if centers.len() == n_clusters {
            return centers;
        }
        side *= 1.5;
    }
}

/// Reads a comma-separated numeric table.
///
/// A first row containing any non-numeric field is treated as a header.
/// Label values may be arbitrary integers; they are remapped to dense ids in
/// increasing order. Parse errors name the 1-based line number.
pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    label_column: Option<usize>,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, label_column)
}

pub fn parse_csv<T: Scalar>(text: &str, label_column: Option<usize>) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((i + 1, record));
    }
    if rows
        .first()
        .is_some_and(|(_, r)| r.iter().any(|f| f.parse::<f64>().is_err()))
    {
        rows.remove(0);
    }
    let (_, first) = rows.first().ok_or(Error::Empty("csv data"))?;
    let width = first.len();
    if let Some(c) = label_column {
        if c >= width {
            return Err(Error::InvalidInput(format!(
                "label column {c} out of range for {width} columns"
            )));
        }
    }
    let dim = width - usize::from(label_column.is_some());
    let mut points = Points::with_capacity(dim, rows.len())
        .map_err(|_| Error::InvalidInput("csv has no feature columns".into()))?;
    let mut raw_labels = Vec::new();
    let mut row = Vec::with_capacity(dim);
    for (line, record) in &rows {
        if record.len() != width {
            return Err(Error::Parse {
                row: *line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        row.clear();
        for (col, field) in record.iter().enumerate() {
            if Some(col) == label_column {
                let label = field
                    .parse::<i64>()
                    .or_else(|_| match field.parse::<f64>() {
                        Ok(v) if v.fract() == 0.0 => Ok(v as i64),
                        _ => Err(()),
                    })
                    .map_err(|_| Error::Parse {
                        row: *line,
                        message: format!("label `{field}` is not an integer"),
                    })?;
                raw_labels.push(label);
            } else {
                let value: f64 = field.parse().map_err(|_| Error::Parse {
                    row: *line,
                    message: format!("column {col}: `{field}` is not numeric"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        row: *line,
                        message: format!("column {col} is not finite"),
                    });
                }
                row.push(T::of(value));
            }
        }
        points.push(&row)?;
    }

    let labels = label_column.map(|_| {
        let dense: BTreeMap<i64, usize> = raw_labels
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        raw_labels.iter().map(|v| dense[v]).collect()
    });
    Dataset::new(points, labels)
}

/// One client's slice of the dataset. Labels travel along for scoring only.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientShard<T> {
    pub client_id: usize,
    pub points: Points<T>,
    pub labels: Option<Vec<usize>>,
    /// Row indices into the source dataset.
    pub indices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub num_clients: usize,
    /// Number of k-means groups used to skew the split (ground-truth class count).
    pub n_clusters: usize,
    pub rng_seed: u64,
}

const PARTITION_KMEANS_TAG: u64 = 0x5041_5254; // "PART"
const PARTITION_ITERS: usize = 100;
const MAX_CLIENT_RETRIES: usize = 64;

/// Cluster-based non-IID split.
///
/// The data is grouped with k-means (`k = n_clusters`). Each of the first
/// `num_clients - 1` clients then picks two distinct groups at random and
/// takes `min(r1, r2, r3)` unassigned points from each, where `r1` is uniform
/// in `[round(size / (n_clusters / 2)), size]`, `r2` is the client's remaining
/// capacity and `r3` what is left in the group (`size = floor(n / num_clients)`).
/// An exhausted group is replaced by a fresh random draw, giving up after
/// `n_clusters` consecutive misses. The last client takes everything left.
pub fn partition_non_iid<T: Scalar>(
    data: &Dataset<T>,
    spec: &PartitionSpec,
) -> Result<Vec<ClientShard<T>>> {
    let n = data.len();
    if spec.num_clients == 0 || spec.num_clients > n {
        return Err(Error::Partition(format!(
            "num_clients must be in [1, {n}], got {}",
            spec.num_clients
        )));
    }
    if spec.n_clusters == 0 || spec.n_clusters > n {
        return Err(Error::Partition(format!(
            "n_clusters must be in [1, {n}], got {}",
            spec.n_clusters
        )));
    }
    if spec.num_clients == 1 {
        return Ok(vec![make_shard(data, 0, (0..n).collect())]);
    }

    let mut rng = seeded(spec.rng_seed);
    let grouping = kmeans(
        &data.points,
        &KMeansConfig {
            k: spec.n_clusters,
            max_iters: PARTITION_ITERS,
            tol: 1e-9,
            init_seed: derive_seed(spec.rng_seed, &[PARTITION_KMEANS_TAG]),
        },
    )?;
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); spec.n_clusters];
    for (i, &g) in grouping.assignment.iter().enumerate() {
        pools[g].push(i);
    }
    pools.iter_mut().for_each(|p| p.shuffle(&mut rng));

    let size = n / spec.num_clients;
    let lower = ((2 * size) as f64 / spec.n_clusters as f64)
        .round()
        .clamp(1.0, size as f64) as usize;

    let mut assigned: Vec<Vec<usize>> = Vec::with_capacity(spec.num_clients);
    for client in 0..spec.num_clients - 1 {
        let mut taken = Vec::new();
        for _ in 0..MAX_CLIENT_RETRIES {
            let first = rng.random_range(0..spec.n_clusters);
            let second = if spec.n_clusters > 1 {
                let s = rng.random_range(0..spec.n_clusters - 1);
                if s >= first {
                    s + 1
                } else {
                    s
                }
            } else {
                first
            };
            for mut group in [first, second] {
                let mut misses = 0;
                while pools[group].is_empty() && misses < spec.n_clusters {
                    misses += 1;
                    group = rng.random_range(0..spec.n_clusters);
                }
                if pools[group].is_empty() {
                    continue;
                }
                let r1 = rng.random_range(lower..=size);
                let r2 = size - taken.len();
                let r3 = pools[group].len();
                let count = r1.min(r2).min(r3);
                let start = pools[group].len() - count;
                taken.extend(pools[group].drain(start..));
            }
            if !taken.is_empty() {
                break;
            }
        }
        if taken.is_empty() {
            return Err(Error::Partition(format!(
                "client {client} received no points"
            )));
        }
        assigned.push(taken);
    }
    assigned.push(pools.into_iter().flatten().collect());

    if assigned.last().is_some_and(Vec::is_empty) {
        let donor = (0..assigned.len())
            .max_by_key(|&i| (assigned[i].len(), std::cmp::Reverse(i)))
            .expect("non-empty");
        let moved = assigned[donor].pop().expect("largest shard is non-empty");
        assigned.last_mut().expect("non-empty").push(moved);
    }

    Ok(assigned
        .into_iter()
        .enumerate()
        .map(|(id, mut idx)| {
            idx.sort_unstable();
            make_shard(data, id, idx)
        })
        .collect())
}

fn make_shard<T: Scalar>(
    data: &Dataset<T>,
    client_id: usize,
    indices: Vec<usize>,
) -> ClientShard<T> {
    ClientShard {
        client_id,
        points: data.points.select(&indices),
        labels: data
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect()),
        indices,
    }
}

/// Reproducibility record of a partition: which rows went to which client.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub client_id: usize,
    pub point_indices: Vec<usize>,
}

pub fn partition_manifest<T>(shards: &[ClientShard<T>]) -> Vec<ShardManifest> {
    shards
        .iter()
        .map(|s| ShardManifest {
            client_id: s.client_id,
            point_indices: s.indices.clone(),
        })
        .collect()
}
