//! `gfc`: run, sweep and inspect gravitational federated clustering experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gfc_core::harness::report::{write_ablation_csv, write_json, write_results_csv, write_sweep};
use gfc_core::harness::{
    ablate, epsilon_scaling_report, sweep, AblationParam, DataSource, Experiment, ExperimentConfig,
    Method, Preset,
};
use gfc_core::local::MassFormula;
use gfc_core::topology::Direction;

#[derive(Parser, Debug)]
#[command(
    name = "gfc",
    version,
    about = "One-shot federated clustering under local differential privacy"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the pipeline once and print the result as JSON.
    Run {
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MethodArg::Gfc)]
        method: MethodArg,
    },
    /// Every (epsilon, seed, method) cell; writes results, aggregates and a manifest.
    Sweep,
    /// Sweep once per value of one hyperparameter.
    Ablate {
        #[arg(long, value_enum)]
        param: ParamArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Fit the growth of centroid error in 1/epsilon.
    Scaling {
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.5, 0.2, 0.1])]
        grid: Vec<f64>,
        #[arg(long, value_enum, default_value_t = MethodArg::Gfc)]
        method: MethodArg,
    },
    /// Export probe coordinates and energies (and optionally the merge tree).
    DumpField {
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Field CSV path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Merge tree JSON path.
        #[arg(long)]
        tree: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML experiment file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in blob workload used when no config file is given.
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,

    /// Load points from a CSV file instead of generating blobs.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[arg(long, global = true, requires = "csv")]
    label_column: Option<usize>,
    #[arg(long, global = true)]
    no_normalize: bool,

    #[arg(long, global = true, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, global = true, value_delimiter = ',', value_enum)]
    methods: Option<Vec<MethodArg>>,
    #[arg(long, global = true)]
    clients: Option<usize>,
    #[arg(long, global = true)]
    n_clusters: Option<usize>,
    #[arg(long, global = true)]
    sensitivity: Option<f64>,
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mass_formula: Option<MassArg>,
    #[arg(long, global = true, value_enum)]
    direction: Option<DirectionArg>,
    #[arg(long, global = true)]
    max_levels: Option<usize>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write NA instead of wall times, making outputs reproducible byte for byte.
    #[arg(long, global = true)]
    no_timings: bool,
    /// Write the merge tree of each GFC run in `run`.
    #[arg(long, global = true)]
    merge_trees: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Small,
    Medium,
    Large,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum MethodArg {
    Gfc,
    Naive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MassArg {
    Exp,
    Reciprocal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    Superlevel,
    Sublevel,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParamArg {
    Alpha,
    Delta,
    K,
    Clients,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gfc => Method::Gfc,
            MethodArg::Naive => Method::Naive,
        }
    }
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)
                .with_context(|| format!("loading {}", path.display()))?,
            (None, Some(p)) => match p {
                PresetArg::Small => Preset::Small.config(),
                PresetArg::Medium => Preset::Medium.config(),
                PresetArg::Large => Preset::Large.config(),
            },
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(path) = &self.csv {
            cfg.data = DataSource::Csv {
                path: path.clone(),
                label_column: self.label_column,
            };
        }
        if self.no_normalize {
            cfg.normalize = false;
        }
        if let Some(v) = &self.epsilons {
            cfg.epsilons = v.clone();
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = &self.methods {
            cfg.methods = v.iter().map(|&m| m.into()).collect();
        }
        cfg.num_clients = self.clients.unwrap_or(cfg.num_clients);
        cfg.n_clusters = self.n_clusters.or(cfg.n_clusters);
        cfg.sensitivity = self.sensitivity.or(cfg.sensitivity);
        cfg.threads = self.threads.or(cfg.threads);

        let o = &mut cfg.overrides;
        o.k = self.k.or(o.k);
        o.delta = self.delta.or(o.delta);
        o.alpha = self.alpha.or(o.alpha);
        o.radius = self.radius.or(o.radius);
        o.p = self.p.or(o.p);
        o.max_levels = self.max_levels.or(o.max_levels);
        o.sigma2 = self.sigma2.or(o.sigma2);
        if let Some(m) = self.mass_formula {
            o.mass_formula = Some(match m {
                MassArg::Exp => MassFormula::Exp,
                MassArg::Reciprocal => MassFormula::Reciprocal,
            });
        }
        if let Some(d) = self.direction {
            o.direction = Some(match d {
                DirectionArg::Superlevel => Direction::Superlevel,
                DirectionArg::Sublevel => Direction::Sublevel,
            });
        }

        if let Some(dir) = &self.out {
            cfg.output.dir = Some(dir.clone());
        }
        if self.no_timings {
            cfg.output.include_timings = false;
        }
        if self.merge_trees {
            cfg.output.merge_trees = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("gfc-out"))
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

fn fmt_eps(e: f64) -> String {
    if (1e-3..1e6).contains(&e) {
        e.to_string()
    } else {
        format!("{e:e}")
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = cli.common.resolve()?;
    if cli.common.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(());
    }
    match cli.command {
        Command::Run {
            epsilon,
            seed,
            method,
        } => {
            let exp = Experiment::prepare(cfg)?;
            let result = match method {
                MethodArg::Gfc => {
                    let (result, out) = exp.run_gfc_detailed(epsilon, seed)?;
                    if exp.config.output.merge_trees {
                        let path = out_dir(&exp.config)
                            .join(format!("merge_tree_eps{epsilon}_seed{seed}.json"));
                        write_json(&out.tree, &path)?;
                    }
                    result
                }
                MethodArg::Naive => exp.run_baseline_naive(epsilon, seed)?,
            };
            if let Some(dir) = &exp.config.output.dir {
                let path = dir.join("results.csv");
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                let file = std::fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                write_results_csv(
                    std::slice::from_ref(&result),
                    exp.config.output.include_timings,
                    file,
                )?;
            }
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Sweep => {
            let exp = Experiment::prepare(cfg)?;
            let out = sweep(&exp)?;
            let dir = out_dir(&exp.config);
            write_sweep(&exp, &out, &dir)?;
            println!(
                "{:<6} {:>10} {:>5} {:>16} {:>16}",
                "method", "epsilon", "runs", "ari", "nmi"
            );
            for a in &out.aggregates {
                println!(
                    "{:<6} {:>10} {:>5} {:>16} {:>16}",
                    a.method.as_str(),
                    fmt_eps(a.epsilon),
                    a.runs - a.failures,
                    format!("{}±{}", fmt(a.ari.mean), fmt(a.ari.std)),
                    format!("{}±{}", fmt(a.nmi.mean), fmt(a.nmi.std)),
                );
            }
            let failed: Vec<_> = out
                .results
                .iter()
                .filter_map(|r| r.error.as_ref())
                .collect();
            if !failed.is_empty() {
                eprintln!(
                    "{} cell(s) recorded as NA; first: {}",
                    failed.len(),
                    failed[0]
                );
            }
            eprintln!("wrote {}", dir.display());
        }
        Command::Ablate { param, values } => {
            let param = match param {
                ParamArg::Alpha => AblationParam::Alpha,
                ParamArg::Delta => AblationParam::Delta,
                ParamArg::K => AblationParam::K,
                ParamArg::Clients => AblationParam::Clients,
            };
            let runs = ablate(&cfg, param, &values)?;
            let dir = out_dir(&cfg);
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(format!("ablation_{}.csv", param.as_str()));
            let file = std::fs::File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            write_ablation_csv(param.as_str(), &runs, cfg.output.include_timings, file)?;
            write_ablation_csv(
                param.as_str(),
                &runs,
                cfg.output.include_timings,
                std::io::stdout(),
            )?;
        }
        Command::Scaling { grid, method } => {
            let exp = Experiment::prepare(cfg)?;
            let report = epsilon_scaling_report(&exp, &grid, method.into())?;
            if let Some(dir) = &exp.config.output.dir {
                write_json(&report, &dir.join("scaling.json"))?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::DumpField {
            epsilon,
            seed,
            output,
            tree,
        } => {
            let exp = Experiment::prepare(cfg)?;
            let uploads = exp.client_uploads(epsilon, seed)?;
            let sources: Vec<_> = uploads.into_iter().flat_map(|u| u.centroids).collect();
            let out = exp.aggregate_gfc(&sources, epsilon, seed)?;
            match &output {
                Some(path) => write_field(&out.field, path)?,
                None => out.field.write_csv(std::io::stdout().lock())?,
            }
            if let Some(path) = &tree {
                write_json(&out.tree, path)?;
            }
        }
    }
    Ok(())
}

fn write_field(field: &gfc_core::PotentialFieldF64, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    field.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
