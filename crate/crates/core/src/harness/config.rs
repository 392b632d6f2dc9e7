use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::MassFormula;
use crate::topology::Direction;

/// Cap on the number of filtration thresholds when none is configured.
pub const DEFAULT_MAX_LEVELS: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Blobs {
        n_clusters: usize,
        points_per_cluster: usize,
        dim: usize,
        spread: f64,
        separation: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        label_column: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gfc,
    Naive,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gfc => "gfc",
            Method::Naive => "naive",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        match self {
            Method::Gfc => 1,
            Method::Naive => 2,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gfc" => Ok(Method::Gfc),
            "naive" => Ok(Method::Naive),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Values that replace the heuristic defaults when set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Local k-means clusters per client.
    pub k: Option<usize>,
    /// Field softening.
    pub delta: Option<f64>,
    /// Probe multiplier.
    pub alpha: Option<f64>,
    /// Probe connectivity radius.
    pub radius: Option<f64>,
    /// Field decay exponent.
    pub p: Option<f64>,
    pub mass_formula: Option<MassFormula>,
    pub direction: Option<Direction>,
    pub max_levels: Option<usize>,
    /// Fixed `sigma^2` for every client instead of the per-shard estimate.
    pub sigma2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write measured wall times; disable for byte-reproducible CSVs.
    pub include_timings: bool,
    /// Also write the merge tree of every GFC run as JSON.
    pub merge_trees: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            include_timings: true,
            merge_trees: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Rescale the data isotropically into `[-1/2, 1/2]^d` before splitting.
    pub normalize: bool,
    pub num_clients: usize,
    /// Target global clusters; defaults to the number of ground-truth classes.
    pub n_clusters: Option<usize>,
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    /// L1 clipping bound; defaults to `d / 2`.
    pub sensitivity: Option<f64>,
    pub methods: Vec<Method>,
    pub kmeans_max_iters: usize,
    /// Worker threads for sweeps; `None` uses every core.
    pub threads: Option<usize>,
    pub overrides: Overrides,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Preset::Small.config()
    }
}

/// Blob workloads at increasing scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Small,
    Medium,
    Large,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Preset::Small),
            "medium" => Ok(Preset::Medium),
            "large" => Ok(Preset::Large),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

impl Preset {
    pub fn config(self) -> ExperimentConfig {
        let (n_clusters, points_per_cluster, num_clients, seeds) = match self {
            Preset::Small => (3, 100, 10, 10),
            Preset::Medium => (5, 400, 20, 10),
            Preset::Large => (10, 1000, 100, 5),
        };
        ExperimentConfig {
            data: DataSource::Blobs {
                n_clusters,
                points_per_cluster,
                dim: 2,
                spread: 0.5,
                separation: 10.0,
                seed: 7,
            },
            normalize: true,
            num_clients,
            n_clusters: None,
            epsilons: vec![1000.0, 100.0, 10.0, 1.0, 0.1, 0.05, 0.01],
            seeds: (0..seeds).collect(),
            sensitivity: None,
            methods: vec![Method::Gfc, Method::Naive],
            kmeans_max_iters: 100,
            threads: None,
            overrides: Overrides::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epsilons.is_empty() {
            return bad("epsilon grid is empty".into());
        }
        if let Some(e) = self
            .epsilons
            .iter()
            .find(|e| !(**e > 0.0) || !e.is_finite())
        {
            return bad(format!("epsilon must be positive and finite, got {e}"));
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.num_clients == 0 {
            return bad("num_clients must be at least 1".into());
        }
        if self.n_clusters == Some(0) {
            return bad("n_clusters must be at least 1".into());
        }
        if let Some(s) = self.sensitivity {
            if !(s > 0.0) {
                return bad(format!("sensitivity must be positive, got {s}"));
            }
        }
        let o = &self.overrides;
        for (name, v) in [
            ("delta", o.delta),
            ("alpha", o.alpha),
            ("radius", o.radius),
            ("p", o.p),
            ("sigma2", o.sigma2),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return bad(format!("override {name} must be positive, got {v}"));
                }
            }
        }
        if o.k == Some(0) || o.max_levels == Some(0) {
            return bad("overrides k and max_levels must be at least 1".into());
        }
        if let DataSource::Blobs {
            n_clusters,
            points_per_cluster,
            dim,
            spread,
            separation,
            ..
        } = &self.data
        {
            if *n_clusters == 0
                || *points_per_cluster == 0
                || *dim == 0
                || !(*spread > 0.0)
                || !(*separation > 0.0)
            {
                return bad("blob parameters must be positive".into());
            }
        }
        Ok(())
    }
}
