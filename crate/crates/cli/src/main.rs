use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pgpr::harness::{
    generate_synthetic, run_experiment, summarize_results, sweep, write_summary, ExperimentConfig, MetricsReport,
    SweepAxis, TIMED_PHASES,
};
use pgpr::keyvalue::KeyValues;
use pgpr::{select_support, Dataset, Hyperparameters, SetId};

#[derive(Parser)]
#[command(name = "pgpr", version, about = "Parallel Gaussian process regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic training and test set from the GP prior.
    Generate(GenerateArgs),
    /// Greedy maximum-variance support set selection over a training CSV.
    SelectSupport(SelectArgs),
    /// Run one experiment.
    Run(ExperimentArgs),
    /// Run an experiment once per value of one parameter.
    Sweep(SweepArgs),
    /// Average results files per configuration.
    Report(ReportArgs),
}

#[derive(Args)]
struct HyperArgs {
    /// Hyperparameter file (`signal_variance`, `noise_variance`, `length_scales`).
    #[arg(long, conflicts_with_all = ["signal_variance", "noise_variance", "length_scale"])]
    hyperparameters: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    signal_variance: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_variance: f64,
    /// Same length scale in every dimension.
    #[arg(long, default_value_t = 0.2)]
    length_scale: f64,
}

impl HyperArgs {
    fn resolve(&self, dim: usize) -> Result<Hyperparameters> {
        let h = match &self.hyperparameters {
            Some(p) => Hyperparameters::read_config(p).with_context(|| format!("reading {}", p.display()))?,
            None => Hyperparameters::isotropic(self.signal_variance, self.noise_variance, self.length_scale, dim)?,
        };
        h.check_dim(dim)?;
        Ok(h)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n_train: usize,
    #[arg(long)]
    n_test: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
    /// Also write the hyperparameters used.
    #[arg(long)]
    hyper_out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    size: usize,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config file; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    support_size: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// `random` or `clustered`.
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    partition_u: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    train_csv: Option<PathBuf>,
    #[arg(long)]
    test_csv: Option<PathBuf>,
    #[arg(long)]
    hyperparameters: Option<PathBuf>,
    #[arg(long)]
    signal_variance: Option<f64>,
    #[arg(long)]
    noise_variance: Option<f64>,
    #[arg(long)]
    length_scale: Option<f64>,
    /// Comma-separated, e.g. `rmse,mnlp`.
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long)]
    fgp_limit: Option<usize>,
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long)]
    messages: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let (mut kv, base) = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (KeyValues::parse(&text)?, base)
            }
            None => (KeyValues::default(), PathBuf::from(".")),
        };
        let path = |p: &PathBuf| std::path::absolute(p).unwrap_or_else(|_| p.clone()).display().to_string();
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.set(k, v);
            }
        };
        set("algorithm", self.algorithm.clone());
        set("workers", self.workers.map(|v| v.to_string()));
        set("support_size", self.support_size.map(|v| v.to_string()));
        set("rank", self.rank.map(|v| v.to_string()));
        set("partition", self.partition.clone());
        set("partition_u", self.partition_u.then(|| "true".to_string()));
        set("seed", self.seed.map(|v| v.to_string()));
        set("instances", self.instances.map(|v| v.to_string()));
        set("n_train", self.n_train.map(|v| v.to_string()));
        set("n_test", self.n_test.map(|v| v.to_string()));
        set("dim", self.dim.map(|v| v.to_string()));
        set("train_csv", self.train_csv.as_ref().map(path));
        set("test_csv", self.test_csv.as_ref().map(path));
        set("hyperparameters", self.hyperparameters.as_ref().map(path));
        set("signal_variance", self.signal_variance.map(|v| v.to_string()));
        set("noise_variance", self.noise_variance.map(|v| v.to_string()));
        set("length_scale", self.length_scale.map(|v| v.to_string()));
        set("metrics", self.metrics.clone());
        set("fgp_limit", self.fgp_limit.map(|v| v.to_string()));
        set("results", self.results.as_ref().map(path));
        set("messages", self.messages.as_ref().map(path));
        Ok(ExperimentConfig::from_key_values(&kv, &base)?)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// `support_size`, `rank` or `workers`.
    #[arg(long)]
    axis: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results files written by `run` or `sweep`.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print_report(r: &MetricsReport) {
    let c = &r.config;
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    let param = match (c.support_size, c.rank) {
        (Some(s), _) => format!(" |S|={s}"),
        (_, Some(k)) => format!(" R={k}"),
        _ => String::new(),
    };
    println!(
        "{} M={}{param}: rmse {} mnlp {} rmse_vs_fgp {} speedup {} negative_variances {}",
        c.algorithm,
        c.workers,
        f(r.rmse()),
        f(r.mnlp()),
        f(r.rmse_vs_fgp()),
        f(r.speedup()),
        r.negative_variance_count()
    );
    let times: Vec<String> = TIMED_PHASES
        .iter()
        .filter_map(|p| r.time(p).map(|t| format!("{p} {t:.4}s")))
        .collect();
    println!("  {}", times.join(", "));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let h = a.hyper.resolve(a.dim)?;
            let (train, test) = generate_synthetic(a.n_train, a.n_test, a.dim, &h, a.seed)?;
            train.write_csv(&a.train_out)?;
            test.write_csv(&a.test_out)?;
            if let Some(p) = a.hyper_out {
                std::fs::write(p, h.to_config_string())?;
            }
        }
        Command::SelectSupport(a) => {
            let train = Dataset::read_csv(&a.train, SetId::TRAIN)?;
            let h = a.hyper.resolve(train.dim())?;
            let s = select_support(train.inputs(), a.size, &h)?;
            s.write_csv(&a.out)?;
        }
        Command::Run(a) => {
            let cfg = a.config()?;
            print_report(&run_experiment(&cfg)?);
        }
        Command::Sweep(a) => {
            let axis: SweepAxis = a.axis.parse()?;
            let cfg = a.experiment.config()?;
            for r in sweep(&cfg, axis, &a.values)? {
                print_report(&r);
            }
        }
        Command::Report(a) => {
            let rows = summarize_results(&a.results)?;
            match a.out {
                Some(p) => write_summary(BufWriter::new(File::create(p)?), &rows)?,
                None => write_summary(io::stdout().lock(), &rows)?,
            }
            io::stdout().flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
