use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, Method, DEFAULT_MAX_LEVELS};
use crate::dataset::{
    generate_blobs, load_csv, partition_non_iid, ClientShard, Dataset, Normalization, PartitionSpec,
};
use crate::error::{Error, Result};
use crate::field::{build_field, FieldConfig, PotentialField};
use crate::heuristics::{heuristic_alpha, heuristic_k, heuristic_softening};
use crate::local::{
    client_phase, kmeans, ClientPhaseConfig, ClientUpload, KMeansConfig, WeightedCentroid,
};
use crate::metrics::{ari, assign, centroid_error, nmi};
use crate::points::Points;
use crate::privacy::PrivacyParams;
use crate::rng::{derive_seed, stream};
use crate::topology::{
    build_merge_tree, extract_centroids, radius_heuristic, FiltrationConfig, MergeTree, Provenance,
};

// Stream tags. New stages get new tags; existing ones never change.
const STAGE_PARTITION: u64 = 0x10;
const STAGE_CLIENT: u64 = 0x20;
const STAGE_KMEANS: u64 = 0x21;
const STAGE_FIELD: u64 = 0x30;
const STAGE_SERVER_KMEANS: u64 = 0x40;
const STAGE_CENTRAL: u64 = 0x50;

/// Milliseconds spent in each stage of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub client_ms: f64,
    pub field_ms: f64,
    pub topology_ms: f64,
    pub total_ms: f64,
}

/// Parameters a run actually used after heuristics and overrides.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub k: Option<usize>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub n_probes: Option<usize>,
    pub n_sources: Option<usize>,
    pub levels: Option<usize>,
}

/// Scores and metadata of one `(method, epsilon, seed)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub epsilon: f64,
    pub seed: u64,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub centroid_error: Option<f64>,
    pub timings: StageTimings,
    pub params: RunParams,
    /// Centroids per selection tier; empty for the baseline.
    pub provenance: BTreeMap<Provenance, usize>,
    /// Clients whose `sigma^2` was estimated from a pair subsample.
    pub sigma2_subsampled_clients: usize,
    /// Stage-tagged failure message when the cell produced no scores.
    pub error: Option<String>,
}

impl RunResult {
    pub(crate) fn failed(method: Method, epsilon: f64, seed: u64, error: String) -> Self {
        Self {
            method,
            epsilon,
            seed,
            ari: None,
            nmi: None,
            centroid_error: None,
            timings: StageTimings::default(),
            params: RunParams::default(),
            provenance: BTreeMap::new(),
            sigma2_subsampled_clients: 0,
            error: Some(error),
        }
    }
}

/// Global centroids with everything needed to inspect how they were found.
#[derive(Clone, Debug)]
pub struct GfcOutput {
    pub centroids: Points<f64>,
    pub provenance: Vec<Provenance>,
    pub field: PotentialField<f64>,
    pub tree: MergeTree<f64>,
    pub params: RunParams,
    pub field_ms: f64,
    pub topology_ms: f64,
}

/// A loaded, normalized dataset plus the resolved settings for every run.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub data: Dataset<f64>,
    pub normalization: Option<Normalization<f64>>,
    pub n_clusters: usize,
    pub sensitivity: f64,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let raw: Dataset<f64> = match &config.data {
            DataSource::Blobs {
                n_clusters,
                points_per_cluster,
                dim,
                spread,
                separation,
                seed,
            } => generate_blobs(
                *n_clusters,
                *points_per_cluster,
                *dim,
                *spread,
                *separation,
                *seed,
            ),
            DataSource::Csv { path, label_column } => load_csv(path, *label_column),
        }
        .map_err(|e| e.in_stage("data"))?;
        let (data, normalization) = if config.normalize {
            let (d, n) = raw.normalized();
            (d, Some(n))
        } else {
            (raw, None)
        };
        let n_clusters = match (config.n_clusters, data.n_classes()) {
            (Some(c), _) => c,
            (None, Some(c)) => c,
            (None, None) => {
                return Err(
                    Error::Config("n_clusters is required for unlabeled data".into())
                        .in_stage("data"),
                )
            }
        };
        let sensitivity = config.sensitivity.unwrap_or(data.dim() as f64 / 2.0);
        Ok(Self {
            config,
            data,
            normalization,
            n_clusters,
            sensitivity,
        })
    }

    /// Runs one cell, never failing: errors become an NA row.
    pub fn run(&self, method: Method, epsilon: f64, seed: u64) -> RunResult {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| match method {
            Method::Gfc => self.run_gfc(epsilon, seed),
            Method::Naive => self.run_baseline_naive(epsilon, seed),
        }));
        match outcome {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => RunResult::failed(method, epsilon, seed, e.to_string()),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "unknown panic".into());
                RunResult::failed(method, epsilon, seed, format!("panic: {msg}"))
            }
        }
    }

    /// Same split for every method and budget under a given seed.
    pub fn partition(&self, seed: u64) -> Result<Vec<ClientShard<f64>>> {
        let spec = PartitionSpec {
            num_clients: self.config.num_clients,
            n_clusters: self.n_clusters,
            rng_seed: derive_seed(seed, &[STAGE_PARTITION]),
        };
        partition_non_iid(&self.data, &spec).map_err(|e| e.in_stage("partition"))
    }

    /// Local k before clamping to each shard's size.
    pub fn local_k(&self) -> usize {
        self.config
            .overrides
            .k
            .unwrap_or_else(|| heuristic_k(self.data.len()))
    }

    /// Privatize, cluster and weigh every shard. Streams depend on
    /// `(epsilon, seed, client)` only, so all methods see the same uploads.
    pub fn client_uploads(&self, epsilon: f64, seed: u64) -> Result<Vec<ClientUpload<f64>>> {
        let shards = self.partition(seed)?;
        let privacy =
            PrivacyParams::new(epsilon, self.sensitivity).map_err(|e| e.in_stage("client"))?;
        let k = self.local_k();
        let eps_bits = epsilon.to_bits();
        shards
            .par_iter()
            .map(|shard| {
                let client = shard.client_id as u64;
                let cfg = ClientPhaseConfig {
                    kmeans: KMeansConfig {
                        max_iters: self.config.kmeans_max_iters,
                        ..KMeansConfig::new(
                            k.clamp(1, shard.points.len()),
                            derive_seed(seed, &[eps_bits, STAGE_KMEANS, client]),
                        )
                    },
                    sigma2_override: self.config.overrides.sigma2,
                    mass_formula: self.config.overrides.mass_formula.unwrap_or_default(),
                };
                let mut rng = stream(seed, &[eps_bits, STAGE_CLIENT, client]);
                client_phase(shard, &privacy, &cfg, &mut rng)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("client"))
    }

    /// Server side of the method: field, merge tree and extraction.
    pub fn aggregate_gfc(
        &self,
        sources: &[WeightedCentroid<f64>],
        epsilon: f64,
        seed: u64,
    ) -> Result<GfcOutput> {
        let o = &self.config.overrides;
        let delta = o.delta.unwrap_or_else(|| heuristic_softening(epsilon));
        let alpha = o.alpha.unwrap_or_else(|| heuristic_alpha(epsilon));
        let r = match o.radius {
            Some(r) => r,
            None => radius_heuristic(sources).map_err(|e| e.in_stage("field"))?,
        };
        let field_cfg = FieldConfig {
            alpha,
            softening: delta,
            exponent_p: o.p.unwrap_or(2.0),
            rng_seed: derive_seed(seed, &[epsilon.to_bits(), Method::Gfc.tag(), STAGE_FIELD]),
        };
        let t = Instant::now();
        let field = build_field(sources, &field_cfg).map_err(|e| e.in_stage("field"))?;
        let field_ms = ms(t);
        let t = Instant::now();
        let levels = field_cfg
            .probe_count(sources.len())
            .min(o.max_levels.unwrap_or(DEFAULT_MAX_LEVELS));
        let filtration = FiltrationConfig {
            n_clusters: self.n_clusters,
            radius: r,
            max_levels: levels.max(1),
            direction: o.direction.unwrap_or_default(),
        };
        let tree = build_merge_tree(&field, &filtration).map_err(|e| e.in_stage("topology"))?;
        let global =
            extract_centroids(&tree, &field, &filtration).map_err(|e| e.in_stage("topology"))?;
        let topology_ms = ms(t);
        let params = RunParams {
            k: Some(self.local_k()),
            delta: Some(delta),
            alpha: Some(alpha),
            r: Some(r),
            n_probes: Some(field.len()),
            n_sources: Some(sources.len()),
            levels: Some(tree.levels_processed),
        };
        Ok(GfcOutput {
            centroids: global.centroids,
            provenance: global.provenance,
            field,
            tree,
            params,
            field_ms,
            topology_ms,
        })
    }

    pub fn run_gfc(&self, epsilon: f64, seed: u64) -> Result<RunResult> {
        self.run_gfc_detailed(epsilon, seed).map(|(r, _)| r)
    }

    /// Full pipeline, also returning the field and merge tree.
    pub fn run_gfc_detailed(&self, epsilon: f64, seed: u64) -> Result<(RunResult, GfcOutput)> {
        let start = Instant::now();
        let uploads = self.client_uploads(epsilon, seed)?;
        let client_ms = ms(start);
        let sources: Vec<WeightedCentroid<f64>> = uploads
            .iter()
            .flat_map(|u| u.centroids.iter().cloned())
            .collect();

        let out = self.aggregate_gfc(&sources, epsilon, seed)?;

        let mut provenance = BTreeMap::new();
        for tag in Provenance::ALL {
            provenance.insert(tag, out.provenance.iter().filter(|&&p| p == tag).count());
        }
        let mut result = self.score(Method::Gfc, epsilon, seed, &out.centroids)?;
        result.params = out.params;
        result.provenance = provenance;
        result.sigma2_subsampled_clients = uploads.iter().filter(|u| u.sigma2.subsampled).count();
        result.timings = StageTimings {
            client_ms,
            field_ms: out.field_ms,
            topology_ms: out.topology_ms,
            total_ms: ms(start),
        };
        Ok((result, out))
    }

    /// Same uploads; the server runs plain k-means over centroid positions.
    pub fn run_baseline_naive(&self, epsilon: f64, seed: u64) -> Result<RunResult> {
        let start = Instant::now();
        let uploads = self.client_uploads(epsilon, seed)?;
        let client_ms = ms(start);
        let rows: Vec<&[f64]> = uploads
            .iter()
            .flat_map(|u| u.centroids.iter().map(|c| c.position.as_slice()))
            .collect();
        let positions = Points::from_rows(&rows).map_err(|e| e.in_stage("baseline"))?;
        let cfg = KMeansConfig {
            max_iters: self.config.kmeans_max_iters,
            ..KMeansConfig::new(
                self.n_clusters,
                derive_seed(
                    seed,
                    &[epsilon.to_bits(), Method::Naive.tag(), STAGE_SERVER_KMEANS],
                ),
            )
        };
        let fit = kmeans(&positions, &cfg).map_err(|e| e.in_stage("baseline"))?;
        let mut result = self.score(Method::Naive, epsilon, seed, &fit.centroids)?;
        result.params = RunParams {
            k: Some(self.local_k()),
            n_sources: Some(positions.len()),
            ..RunParams::default()
        };
        result.sigma2_subsampled_clients = uploads.iter().filter(|u| u.sigma2.subsampled).count();
        result.timings = StageTimings {
            client_ms,
            total_ms: ms(start),
            ..StageTimings::default()
        };
        Ok(result)
    }

    /// Non-private k-means on the pooled data, the reference for recovery.
    pub fn centralized_kmeans(&self, seed: u64) -> Result<Points<f64>> {
        let cfg = KMeansConfig {
            max_iters: self.config.kmeans_max_iters,
            ..KMeansConfig::new(self.n_clusters, derive_seed(seed, &[STAGE_CENTRAL]))
        };
        Ok(kmeans(&self.data.points, &cfg)
            .map_err(|e| e.in_stage("baseline"))?
            .centroids)
    }

    /// ARI of the centralized k-means labeling, NA when undefined.
    pub fn centralized_ari(&self, seed: u64) -> Result<Option<f64>> {
        let centroids = self.centralized_kmeans(seed)?;
        let Some(labels) = &self.data.labels else {
            return Ok(None);
        };
        let pred = assign(&self.data.points, &centroids).map_err(|e| e.in_stage("score"))?;
        Ok(ari(labels, &pred).ok())
    }

    /// Scores centroids against the ground truth of the loaded data.
    pub fn score(
        &self,
        method: Method,
        epsilon: f64,
        seed: u64,
        centroids: &Points<f64>,
    ) -> Result<RunResult> {
        let pred = assign(&self.data.points, centroids).map_err(|e| e.in_stage("score"))?;
        let (ari_v, nmi_v) = match &self.data.labels {
            Some(labels) => (
                undefined_as_none(ari(labels, &pred)).map_err(|e| e.in_stage("score"))?,
                Some(nmi(labels, &pred).map_err(|e| e.in_stage("score"))?),
            ),
            None => (None, None),
        };
        let err = match &self.data.reference_centers {
            Some(reference) if reference.len() == centroids.len() => {
                Some(centroid_error(centroids, reference).map_err(|e| e.in_stage("score"))?)
            }
            _ => None,
        };
        Ok(RunResult {
            method,
            epsilon,
            seed,
            ari: ari_v,
            nmi: nmi_v,
            centroid_error: err,
            timings: StageTimings::default(),
            params: RunParams::default(),
            provenance: BTreeMap::new(),
            sigma2_subsampled_clients: 0,
            error: None,
        })
    }
}

fn undefined_as_none(v: Result<f64>) -> Result<Option<f64>> {
    match v {
        Ok(x) => Ok(Some(x)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
