use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::pipeline::{Experiment, RunResult};
use crate::error::{Error, Result};

/// Mean and sample standard deviation over the defined values of a column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return Self::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean: Some(mean),
            std: Some(std),
            count: v.len(),
        }
    }
}

/// One `(method, epsilon)` cell aggregated over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub epsilon: f64,
    pub runs: usize,
    pub failures: usize,
    pub ari: Summary,
    pub nmi: Summary,
    pub centroid_error: Summary,
    pub wall_ms: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub results: Vec<RunResult>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepOutput {
    pub fn aggregate(&self, method: Method, epsilon: f64) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.epsilon == epsilon)
    }
}

pub(crate) fn with_pool<R: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every `(epsilon, seed, method)` cell. Results come back ordered by
/// epsilon, then seed, then method, in configuration order.
pub fn sweep(exp: &Experiment) -> Result<SweepOutput> {
    let cfg = &exp.config;
    let cells: Vec<(f64, u64, Method)> = cfg
        .epsilons
        .iter()
        .flat_map(|&e| {
            cfg.seeds
                .iter()
                .flat_map(move |&s| cfg.methods.iter().map(move |&m| (e, s, m)))
        })
        .collect();
    let results: Vec<RunResult> = with_pool(cfg.threads, || {
        cells
            .par_iter()
            .map(|&(e, s, m)| exp.run(m, e, s))
            .collect()
    })?;
    let aggregates = aggregate(cfg, &results);
    Ok(SweepOutput {
        results,
        aggregates,
    })
}

pub fn aggregate(cfg: &ExperimentConfig, results: &[RunResult]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &epsilon in &cfg.epsilons {
        for &method in &cfg.methods {
            let cell: Vec<&RunResult> = results
                .iter()
                .filter(|r| r.method == method && r.epsilon == epsilon)
                .collect();
            rows.push(AggregateRow {
                method,
                epsilon,
                runs: cell.len(),
                failures: cell.iter().filter(|r| r.error.is_some()).count(),
                ari: Summary::of(cell.iter().map(|r| r.ari)),
                nmi: Summary::of(cell.iter().map(|r| r.nmi)),
                centroid_error: Summary::of(cell.iter().map(|r| r.centroid_error)),
                wall_ms: Summary::of(
                    cell.iter()
                        .filter(|r| r.error.is_none())
                        .map(|r| Some(r.timings.total_ms)),
                ),
            });
        }
    }
    rows
}

/// Hyperparameter varied by [`ablate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationParam {
    Alpha,
    Delta,
    K,
    Clients,
}

impl AblationParam {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationParam::Alpha => "alpha",
            AblationParam::Delta => "delta",
            AblationParam::K => "k",
            AblationParam::Clients => "clients",
        }
    }

    /// `config` with this parameter fixed to `value`; everything else unchanged.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = config.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "{} must be a positive integer, got {value}",
                    self.as_str()
                )))
            }
        };
        match self {
            AblationParam::Alpha => c.overrides.alpha = Some(value),
            AblationParam::Delta => c.overrides.delta = Some(value),
            AblationParam::K => c.overrides.k = Some(count()?),
            AblationParam::Clients => c.num_clients = count()?,
        }
        c.validate()?;
        Ok(c)
    }
}

impl std::str::FromStr for AblationParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(AblationParam::Alpha),
            "delta" => Ok(AblationParam::Delta),
            "k" => Ok(AblationParam::K),
            "clients" => Ok(AblationParam::Clients),
            other => Err(Error::Config(format!(
                "unknown ablation parameter `{other}`"
            ))),
        }
    }
}

/// Sweeps once per value of `param`, holding the rest at their configured values.
pub fn ablate(
    config: &ExperimentConfig,
    param: AblationParam,
    values: &[f64],
) -> Result<Vec<(f64, SweepOutput)>> {
    if values.is_empty() {
        return Err(Error::Config("no ablation values given".into()));
    }
    values
        .iter()
        .map(|&v| {
            let exp = Experiment::prepare(param.apply(config, v)?)?;
            Ok((v, sweep(&exp)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = Summary::of([Some(1.0), None, Some(3.0)]);
        assert_eq!((s.mean, s.count), (Some(2.0), 2));
        assert!((s.std.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(Summary::of([Some(5.0); 4]).std, Some(0.0));
        assert_eq!(Summary::of([None, None]), Summary::default());
    }

    #[test]
    fn ablation_values_checked() {
        let c = ExperimentConfig::default();
        assert_eq!(
            AblationParam::K.apply(&c, 4.0).unwrap().overrides.k,
            Some(4)
        );
        assert_eq!(
            AblationParam::Clients.apply(&c, 7.0).unwrap().num_clients,
            7
        );
        assert!(AblationParam::K.apply(&c, 2.5).is_err());
        assert!(AblationParam::Delta.apply(&c, -1.0).is_err());
    }
}
