//! CSV and JSON writers for sweep output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::pipeline::{Experiment, RunResult, StageTimings};
use super::sweep::{AggregateRow, Summary, SweepOutput};
use crate::error::{Error, Result};
use crate::topology::Provenance;

/// Columns of the per-run results file, in order.
pub const RESULT_COLUMNS: [&str; 22] = [
    "method",
    "epsilon",
    "seed",
    "ari",
    "nmi",
    "centroid_error",
    "wall_ms",
    "k",
    "delta",
    "alpha",
    "r",
    "n_probes",
    "n_sources",
    "levels",
    "provenance_persistent_leaf",
    "provenance_isolated_path",
    "provenance_top_energy_leaf",
    "provenance_top_energy_probe",
    "client_ms",
    "field_ms",
    "topology_ms",
    "error",
];

pub const AGGREGATE_COLUMNS: [&str; 14] = [
    "method",
    "epsilon",
    "runs",
    "failures",
    "ari_mean",
    "ari_std",
    "nmi_mean",
    "nmi_std",
    "centroid_error_mean",
    "centroid_error_std",
    "ari_mean_pct",
    "nmi_mean_pct",
    "wall_ms_mean",
    "wall_ms_std",
];

const NA: &str = "NA";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv output: {e}"))
}

fn result_record(r: &RunResult, include_timings: bool) -> Vec<String> {
    let timing = |v: f64| {
        if include_timings {
            v.to_string()
        } else {
            NA.to_string()
        }
    };
    let prov = |tag: Provenance| {
        if r.provenance.is_empty() {
            NA.to_string()
        } else {
            r.provenance[&tag].to_string()
        }
    };
    let ok = r.error.is_none();
    vec![
        r.method.as_str().to_string(),
        r.epsilon.to_string(),
        r.seed.to_string(),
        opt(r.ari),
        opt(r.nmi),
        opt(r.centroid_error),
        if ok {
            timing(r.timings.total_ms)
        } else {
            NA.into()
        },
        opt(r.params.k),
        opt(r.params.delta),
        opt(r.params.alpha),
        opt(r.params.r),
        opt(r.params.n_probes),
        opt(r.params.n_sources),
        opt(r.params.levels),
        prov(Provenance::PersistentLeaf),
        prov(Provenance::IsolatedPath),
        prov(Provenance::TopEnergyLeaf),
        prov(Provenance::TopEnergyProbe),
        if ok {
            timing(r.timings.client_ms)
        } else {
            NA.into()
        },
        if ok {
            timing(r.timings.field_ms)
        } else {
            NA.into()
        },
        if ok {
            timing(r.timings.topology_ms)
        } else {
            NA.into()
        },
        r.error.clone().unwrap_or_default(),
    ]
}

/// Per-run rows. With `include_timings` off the time columns read `NA`, which
/// makes the file a pure function of the configuration.
pub fn write_results_csv<W: Write>(
    results: &[RunResult],
    include_timings: bool,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS).map_err(csv_err)?;
    for r in results {
        w.write_record(result_record(r, include_timings))
            .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("csv output: {e}")))
}

fn pct(s: &Summary) -> String {
    opt(s.mean.map(|m| m * 100.0))
}

pub fn write_aggregate_csv<W: Write>(
    rows: &[AggregateRow],
    include_timings: bool,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_COLUMNS).map_err(csv_err)?;
    for a in rows {
        let timing = |v: Option<f64>| {
            if include_timings {
                opt(v)
            } else {
                NA.to_string()
            }
        };
        w.write_record([
            a.method.as_str().to_string(),
            a.epsilon.to_string(),
            a.runs.to_string(),
            a.failures.to_string(),
            opt(a.ari.mean),
            opt(a.ari.std),
            opt(a.nmi.mean),
            opt(a.nmi.std),
            opt(a.centroid_error.mean),
            opt(a.centroid_error.std),
            pct(&a.ari),
            pct(&a.nmi),
            timing(a.wall_ms.mean),
            timing(a.wall_ms.std),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("csv output: {e}")))
}

/// Everything needed to reproduce a sweep.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub config: &'a ExperimentConfig,
    pub n_points: usize,
    pub dim: usize,
    pub n_clusters: usize,
    pub sensitivity: f64,
    pub normalization: Option<&'a crate::dataset::Normalization<f64>>,
    /// Timings are zeroed when the configuration excludes them.
    pub runs: Vec<RunResult>,
}

impl<'a> Manifest<'a> {
    pub fn new(exp: &'a Experiment, runs: &[RunResult]) -> Self {
        let mut runs = runs.to_vec();
        if !exp.config.output.include_timings {
            for r in &mut runs {
                r.timings = StageTimings::default();
            }
        }
        Self {
            config: &exp.config,
            n_points: exp.data.len(),
            dim: exp.data.dim(),
            n_clusters: exp.n_clusters,
            sensitivity: exp.sensitivity,
            normalization: exp.normalization.as_ref(),
            runs,
        }
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let f = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(std::io::BufWriter::new(f))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)
        .map_err(|e| Error::Config(format!("json output: {e}")))?;
    f.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `results.csv`, `aggregate.csv` and `manifest.json` into `dir`.
pub fn write_sweep(exp: &Experiment, out: &SweepOutput, dir: &Path) -> Result<()> {
    let timings = exp.config.output.include_timings;
    write_results_csv(&out.results, timings, create(&dir.join("results.csv"))?)?;
    write_aggregate_csv(
        &out.aggregates,
        timings,
        create(&dir.join("aggregate.csv"))?,
    )?;
    write_json(
        &Manifest::new(exp, &out.results),
        &dir.join("manifest.json"),
    )
}

/// Ablation table: the aggregate columns prefixed by parameter name and value.
pub fn write_ablation_csv<W: Write>(
    param: &str,
    runs: &[(f64, SweepOutput)],
    include_timings: bool,
    out: W,
) -> Result<()> {
    let mut buf = Vec::new();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["parameter", "value"];
    header.extend(AGGREGATE_COLUMNS);
    w.write_record(&header).map_err(csv_err)?;
    for (value, sweep) in runs {
        buf.clear();
        write_aggregate_csv(&sweep.aggregates, include_timings, &mut buf)?;
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let mut row = vec![param.to_string(), value.to_string()];
            row.extend(rec.iter().map(str::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Config(format!("csv output: {e}")))
}
