use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use super::config::{Algorithm, DataSource, ExperimentConfig, Metric, SweepAxis};
use super::metrics::{mnlp, rmse_between};
use super::synthetic::generate_synthetic;
use crate::centralized::{icf_factorize, icf_predict, pic_predict, pitc_predict};
use crate::data::{format_float, Dataset, SetId};
use crate::error::{GpError, Result};
use crate::fullgp::fgp_predict;
use crate::parallel::{block_structure, partition_clustered, partition_random, Engine, MessageLog, PartitionMode, SparseVariant};
use crate::predictive::PredictiveDistribution;
use crate::support::select_support;

/// Timed phases, in CSV column order. For pICF, `predict` covers the local
/// summaries, the global summary and the prediction.
pub const TIMED_PHASES: [&str; 6] = ["partition", "support", "factorize", "local_summary", "global_summary", "predict"];

#[derive(Clone, Debug)]
pub struct InstanceMetrics {
    pub instance: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub rmse: Option<f64>,
    /// `None` when not requested, when the test set has no outputs, or when
    /// some variance is not positive.
    pub mnlp: Option<f64>,
    pub rmse_vs_fgp: Option<f64>,
    pub negative_variance_count: usize,
    pub min_variance: Option<f64>,
    /// Seconds per phase, in [`TIMED_PHASES`] order where present.
    pub timings: Vec<(&'static str, f64)>,
    /// Centralized counterpart on the same data, support set and blocks.
    pub centralized_time: Option<f64>,
    pub log: MessageLog,
}

impl InstanceMetrics {
    pub fn time(&self, phase: &str) -> Option<f64> {
        self.timings.iter().find(|(p, _)| *p == phase).map(|(_, t)| *t)
    }

    pub fn total_time(&self) -> f64 {
        self.timings.iter().map(|(_, t)| t).sum()
    }

    /// Time spent after the data, the support set and the partition are
    /// fixed; the part both sides of a speedup have to do.
    pub fn compute_time(&self) -> f64 {
        self.timings
            .iter()
            .filter(|(p, _)| !matches!(*p, "partition" | "support"))
            .map(|(_, t)| t)
            .sum()
    }

    pub fn speedup(&self) -> Option<f64> {
        let c = self.centralized_time?;
        let p = self.compute_time();
        (p > 0.0 && c > 0.0).then(|| c / p)
    }
}

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub instances: Vec<InstanceMetrics>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<Option<f64>> = values.collect();
    if v.is_empty() || v.iter().any(Option::is_none) {
        return None;
    }
    Some(v.iter().map(|x| x.unwrap()).sum::<f64>() / v.len() as f64)
}

impl MetricsReport {
    pub fn rmse(&self) -> Option<f64> {
        mean(self.instances.iter().map(|i| i.rmse))
    }

    /// Mean MNLP, or `None` if any instance could not be scored.
    pub fn mnlp(&self) -> Option<f64> {
        mean(self.instances.iter().map(|i| i.mnlp))
    }

    pub fn rmse_vs_fgp(&self) -> Option<f64> {
        mean(self.instances.iter().map(|i| i.rmse_vs_fgp))
    }

    pub fn negative_variance_count(&self) -> usize {
        self.instances.iter().map(|i| i.negative_variance_count).sum()
    }

    pub fn time(&self, phase: &str) -> Option<f64> {
        mean(self.instances.iter().map(|i| i.time(phase)))
    }

    pub fn total_time(&self) -> f64 {
        self.instances.iter().map(InstanceMetrics::total_time).sum::<f64>() / self.instances.len() as f64
    }

    pub fn speedup(&self) -> Option<f64> {
        mean(self.instances.iter().map(InstanceMetrics::speedup))
    }
}

struct Timer(Vec<(&'static str, f64)>);

impl Timer {
    fn run<T>(&mut self, phase: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        let t = start.elapsed().as_secs_f64();
        match self.0.iter_mut().find(|(p, _)| *p == phase) {
            Some(slot) => slot.1 += t,
            None => self.0.push((phase, t)),
        }
        Ok(out)
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn load_files(cfg: &ExperimentConfig) -> Result<Option<(Dataset, Dataset)>> {
    match &cfg.source {
        DataSource::Files { train, test } => {
            let train = Dataset::read_csv(train, SetId::TRAIN)?;
            let test = Dataset::read_csv(test, SetId::TEST)?;
            if train.outputs().is_none() {
                return Err(GpError::InvalidInput("training csv has no y column".into()));
            }
            cfg.hyperparameters.check_dim(train.dim())?;
            Ok(Some((train, test)))
        }
        DataSource::Synthetic { .. } => Ok(None),
    }
}

fn partition_blocks(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset, seed: u64) -> Result<crate::centralized::BlockStructure> {
    let assignments = match cfg.partition {
        PartitionMode::Random => partition_random(train, test, cfg.workers, seed)?,
        PartitionMode::Clustered => partition_clustered(train, test, cfg.workers, seed)?,
    };
    block_structure(&assignments)
}

fn run_instance(cfg: &ExperimentConfig, files: Option<&(Dataset, Dataset)>, instance: usize) -> Result<InstanceMetrics> {
    let seed = cfg.seed.wrapping_add(instance as u64);
    let h = &cfg.hyperparameters;
    let (train, test) = match (files, &cfg.source) {
        (Some((a, b)), _) => (a.clone(), b.clone()),
        (None, DataSource::Synthetic { n_train, n_test, dim }) => generate_synthetic(*n_train, *n_test, *dim, h, seed)?,
        (None, DataSource::Files { .. }) => unreachable!("files are loaded up front"),
    };
    if test.is_empty() {
        return Err(GpError::InvalidInput("test set is empty".into()));
    }
    let inputs = test.without_outputs();
    let mut timer = Timer(Vec::new());
    let mut centralized_time = None;
    let mut log = MessageLog::new();

    let pred: PredictiveDistribution = match cfg.algorithm {
        Algorithm::Fgp => timer.run("predict", || fgp_predict(&train, &inputs, h, false))?,
        Algorithm::Pitc | Algorithm::Pic => {
            let blocks = timer.run("partition", || partition_blocks(cfg, &train, &inputs, seed))?;
            let s = timer.run("support", || select_support(train.inputs(), cfg.support_size.unwrap(), h))?;
            timer.run("predict", || {
                if cfg.algorithm == Algorithm::Pitc {
                    pitc_predict(&train, &inputs, &s, &blocks, h, false)
                } else {
                    pic_predict(&train, &inputs, &s, &blocks, h, false)
                }
            })?
        }
        Algorithm::Icf => {
            let f = timer.run("factorize", || icf_factorize(&train, h, cfg.rank.unwrap()))?;
            timer.run("predict", || icf_predict(&train, &inputs, &f, h, false))?
        }
        Algorithm::Ppitc | Algorithm::Ppic => {
            let mut engine = timer.run("partition", || Engine::partitioned(&train, &inputs, cfg.workers, cfg.partition, seed))?;
            let s = timer.run("support", || select_support(train.inputs(), cfg.support_size.unwrap(), h))?;
            let variant = if cfg.algorithm == Algorithm::Ppitc { SparseVariant::Pitc } else { SparseVariant::Pic };
            let local = timer.run("local_summary", || engine.sparse_local(&s, h, variant))?;
            let global = timer.run("global_summary", || engine.sparse_global(&local, h))?;
            let run = timer.run("predict", || engine.sparse_predict(&local, &global, h, false))?;
            let blocks = engine.block_structure()?;
            let (_, t) = timed(|| {
                if variant == SparseVariant::Pitc {
                    pitc_predict(&train, &inputs, &s, &blocks, h, false)
                } else {
                    pic_predict(&train, &inputs, &s, &blocks, h, false)
                }
            })?;
            centralized_time = Some(t);
            log = engine.take_log();
            run.prediction
        }
        Algorithm::Picf => {
            let rank = cfg.rank.unwrap();
            let mut engine = timer.run("partition", || Engine::partitioned(&train, &inputs, cfg.workers, cfg.partition, seed))?;
            let factor = timer.run("factorize", || engine.distributed_icf(h, rank))?;
            let run = timer.run("predict", || engine.picf_with_factor(factor, h, cfg.partition_u, false))?;
            let (_, t) = timed(|| {
                let f = icf_factorize(&train, h, rank)?;
                icf_predict(&train, &inputs, &f, h, false)
            })?;
            centralized_time = Some(t);
            log = engine.take_log();
            run.prediction
        }
    };

    let truth = test.outputs();
    let rmse = match truth {
        Some(y) if cfg.metrics.contains(&Metric::Rmse) => Some(rmse_between(&pred.mean, y)?),
        _ => None,
    };
    let mnlp = match truth {
        Some(y) if cfg.metrics.contains(&Metric::Mnlp) => match mnlp(&pred, y) {
            Ok(v) => Some(v),
            Err(GpError::NonpositiveVariance { .. }) => None,
            Err(e) => return Err(e),
        },
        _ => None,
    };
    let rmse_vs_fgp = if cfg.algorithm == Algorithm::Fgp {
        Some(0.0)
    } else if train.len() <= cfg.fgp_limit {
        let fgp = fgp_predict(&train, &inputs, h, false)?;
        Some(rmse_between(&pred.mean, &fgp.mean)?)
    } else {
        None
    };
    Ok(InstanceMetrics {
        instance,
        seed,
        n_train: train.len(),
        n_test: test.len(),
        rmse,
        mnlp,
        rmse_vs_fgp,
        negative_variance_count: pred.negative_variance_count(),
        min_variance: pred.min_variance,
        timings: timer.0,
        centralized_time,
        log,
    })
}

/// Runs all instances of `cfg` without writing files.
pub fn run_instances(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let files = load_files(cfg)?;
    let instances = (0..cfg.instances)
        .map(|i| run_instance(cfg, files.as_ref(), i))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        config: cfg.clone(),
        instances,
    })
}

/// Runs `cfg` and writes its results and message log where configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let report = run_instances(cfg)?;
    write_outputs(cfg, std::slice::from_ref(&report))?;
    Ok(report)
}

/// Runs `base` once per value of `axis`; all rows go to the base config's
/// output files.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[usize]) -> Result<Vec<MetricsReport>> {
    if values.is_empty() {
        return Err(GpError::InvalidInput("nothing to sweep".into()));
    }
    let reports = values
        .iter()
        .map(|&v| run_instances(&base.with_axis(axis, v)?))
        .collect::<Result<Vec<_>>>()?;
    write_outputs(base, &reports)?;
    Ok(reports)
}

fn write_outputs(cfg: &ExperimentConfig, reports: &[MetricsReport]) -> Result<()> {
    if let Some(p) = &cfg.results {
        write_results(p, reports)?;
    }
    if let Some(p) = &cfg.messages {
        write_messages(p, reports)?;
    }
    Ok(())
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn config_columns(c: &ExperimentConfig) -> Vec<String> {
    vec![
        c.algorithm.to_string(),
        c.workers.to_string(),
        opt_usize(c.support_size),
        opt_usize(c.rank),
        c.partition.to_string(),
        c.partition_u.to_string(),
    ]
}

const CONFIG_HEADER: [&str; 6] = ["algorithm", "workers", "support_size", "rank", "partition", "partition_u"];

pub(crate) fn results_header() -> Vec<String> {
    let mut h: Vec<String> = CONFIG_HEADER.iter().map(|s| s.to_string()).collect();
    for s in [
        "seed",
        "instance",
        "n_train",
        "n_test",
        "rmse",
        "mnlp",
        "rmse_vs_fgp",
        "negative_variance_count",
        "min_variance",
        "messages",
        "scalars",
    ] {
        h.push(s.into());
    }
    for p in TIMED_PHASES {
        h.push(format!("time_{p}"));
    }
    for s in ["time_total", "time_centralized", "speedup"] {
        h.push(s.into());
    }
    h
}

pub fn write_results_to<W: Write>(w: W, reports: &[MetricsReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(results_header())?;
    for r in reports {
        for i in &r.instances {
            let totals = i.log.algorithm_totals();
            let mut row = config_columns(&r.config);
            row.extend([
                i.seed.to_string(),
                i.instance.to_string(),
                i.n_train.to_string(),
                i.n_test.to_string(),
                opt_float(i.rmse),
                opt_float(i.mnlp),
                opt_float(i.rmse_vs_fgp),
                i.negative_variance_count.to_string(),
                opt_float(i.min_variance),
                totals.messages.to_string(),
                totals.scalars.to_string(),
            ]);
            for p in TIMED_PHASES {
                row.push(opt_float(i.time(p)));
            }
            row.push(format_float(i.total_time()));
            row.push(opt_float(i.centralized_time));
            row.push(opt_float(i.speedup()));
            out.write_record(row)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_results(path: &Path, reports: &[MetricsReport]) -> Result<()> {
    write_results_to(BufWriter::new(File::create(path)?), reports)
}

fn write_messages(path: &Path, reports: &[MetricsReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<&str> = CONFIG_HEADER.to_vec();
    header.extend(["instance", "phase", "sender", "receiver", "scalar_count", "bytes", "tag", "hop"]);
    out.write_record(&header)?;
    for r in reports {
        for i in &r.instances {
            for m in i.log.records() {
                let mut row = config_columns(&r.config);
                row.extend([
                    i.instance.to_string(),
                    m.phase.as_str().to_string(),
                    m.sender.to_string(),
                    m.receiver.to_string(),
                    m.scalar_count.to_string(),
                    m.bytes.to_string(),
                    m.tag.to_string(),
                    m.hop.to_string(),
                ]);
                out.write_record(row)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
