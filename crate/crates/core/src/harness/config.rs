use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{GpError, Result};
use crate::kernel::Hyperparameters;
use crate::keyvalue::KeyValues;
use crate::parallel::PartitionMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Fgp,
    Pitc,
    Pic,
    Icf,
    Ppitc,
    Ppic,
    Picf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Fgp,
        Algorithm::Pitc,
        Algorithm::Pic,
        Algorithm::Icf,
        Algorithm::Ppitc,
        Algorithm::Ppic,
        Algorithm::Picf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Fgp => "fgp",
            Algorithm::Pitc => "pitc",
            Algorithm::Pic => "pic",
            Algorithm::Icf => "icf",
            Algorithm::Ppitc => "ppitc",
            Algorithm::Ppic => "ppic",
            Algorithm::Picf => "picf",
        }
    }

    pub fn uses_support(self) -> bool {
        matches!(self, Algorithm::Pitc | Algorithm::Pic | Algorithm::Ppitc | Algorithm::Ppic)
    }

    pub fn uses_rank(self) -> bool {
        matches!(self, Algorithm::Icf | Algorithm::Picf)
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, Algorithm::Ppitc | Algorithm::Ppic | Algorithm::Picf)
    }

    /// The centralized algorithm a parallel one is timed against.
    pub fn centralized(self) -> Option<Algorithm> {
        match self {
            Algorithm::Ppitc => Some(Algorithm::Pitc),
            Algorithm::Ppic => Some(Algorithm::Pic),
            Algorithm::Picf => Some(Algorithm::Icf),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| GpError::InvalidInput(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Rmse,
    Mnlp,
}

impl FromStr for Metric {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(Metric::Rmse),
            "mnlp" => Ok(Metric::Mnlp),
            _ => Err(GpError::InvalidInput(format!("unknown metric {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Fresh prior draws per instance.
    Synthetic { n_train: usize, n_test: usize, dim: usize },
    /// Fixed CSV files; instances differ only in the partition seed.
    Files { train: PathBuf, test: PathBuf },
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    SupportSize,
    Rank,
    Workers,
}

impl FromStr for SweepAxis {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "support_size" => Ok(SweepAxis::SupportSize),
            "rank" => Ok(SweepAxis::Rank),
            "workers" => Ok(SweepAxis::Workers),
            _ => Err(GpError::InvalidInput(format!("cannot sweep over {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub workers: usize,
    pub support_size: Option<usize>,
    pub rank: Option<usize>,
    pub partition: PartitionMode,
    /// Split the `Σ̈` computation of pICF over the workers' test inputs.
    pub partition_u: bool,
    pub seed: u64,
    pub instances: usize,
    pub source: DataSource,
    pub hyperparameters: Hyperparameters,
    pub metrics: Vec<Metric>,
    /// FGP is run for reference only up to this many training points.
    pub fgp_limit: usize,
    pub results: Option<PathBuf>,
    pub messages: Option<PathBuf>,
}

const DEFAULT_SIGNAL_VARIANCE: f64 = 1.0;
const DEFAULT_NOISE_VARIANCE: f64 = 0.01;
const DEFAULT_LENGTH_SCALE: f64 = 0.2;

const KEYS: &[&str] = &[
    "algorithm",
    "workers",
    "support_size",
    "rank",
    "partition",
    "partition_u",
    "seed",
    "instances",
    "n_train",
    "n_test",
    "dim",
    "train_csv",
    "test_csv",
    "hyperparameters",
    "signal_variance",
    "noise_variance",
    "length_scale",
    "length_scales",
    "jitter",
    "metrics",
    "fgp_limit",
    "results",
    "messages",
];

impl ExperimentConfig {
    /// A synthetic-data configuration with unit signal variance, noise
    /// variance 0.01 and length scale 0.2 in every dimension.
    pub fn synthetic(algorithm: Algorithm, n_train: usize, n_test: usize, dim: usize) -> Result<Self> {
        Ok(ExperimentConfig {
            algorithm,
            workers: 1,
            support_size: None,
            rank: None,
            partition: PartitionMode::Random,
            partition_u: false,
            seed: 0,
            instances: 5,
            source: DataSource::Synthetic { n_train, n_test, dim },
            hyperparameters: Hyperparameters::isotropic(DEFAULT_SIGNAL_VARIANCE, DEFAULT_NOISE_VARIANCE, DEFAULT_LENGTH_SCALE, dim)?,
            metrics: vec![Metric::Rmse, Metric::Mnlp],
            fgp_limit: 4096,
            results: None,
            messages: None,
        })
    }

    pub fn from_config_str(text: &str, base_dir: &Path) -> Result<Self> {
        ExperimentConfig::from_key_values(&KeyValues::parse(text)?, base_dir)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_config_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_key_values(kv: &KeyValues, base_dir: &Path) -> Result<Self> {
        let unknown = kv.unknown_keys(KEYS);
        if !unknown.is_empty() {
            return Err(config_error(format!("unknown keys {unknown:?}")));
        }
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        };
        let algorithm: Algorithm = kv.require::<String>("algorithm")?.parse()?;
        let source = match (kv.get::<String>("train_csv")?, kv.get::<String>("test_csv")?) {
            (Some(train), Some(test)) => DataSource::Files {
                train: resolve(train),
                test: resolve(test),
            },
            (None, None) => DataSource::Synthetic {
                n_train: kv.require("n_train")?,
                n_test: kv.require("n_test")?,
                dim: kv.require("dim")?,
            },
            _ => return Err(config_error("train_csv and test_csv go together".into())),
        };
        let hyperparameters = match kv.get::<String>("hyperparameters")? {
            Some(p) => Hyperparameters::read_config(resolve(p))?,
            None => {
                let ls = match (kv.get_list::<f64>("length_scales")?, kv.get::<f64>("length_scale")?) {
                    (Some(list), None) => list,
                    (None, Some(l)) => match &source {
                        DataSource::Synthetic { dim, .. } => vec![l; *dim],
                        DataSource::Files { .. } => {
                            return Err(config_error("length_scale needs dim; use length_scales with csv data".into()))
                        }
                    },
                    (None, None) => match &source {
                        DataSource::Synthetic { dim, .. } => vec![DEFAULT_LENGTH_SCALE; *dim],
                        DataSource::Files { .. } => return Err(config_error("csv data needs length_scales".into())),
                    },
                    (Some(_), Some(_)) => return Err(config_error("give only one of length_scale and length_scales".into())),
                };
                let h = Hyperparameters::new(
                    kv.get("signal_variance")?.unwrap_or(DEFAULT_SIGNAL_VARIANCE),
                    kv.get("noise_variance")?.unwrap_or(DEFAULT_NOISE_VARIANCE),
                    ls,
                )?;
                match kv.get::<f64>("jitter")? {
                    Some(j) => h.with_jitter(j)?,
                    None => h,
                }
            }
        };
        let cfg = ExperimentConfig {
            algorithm,
            workers: kv.get("workers")?.unwrap_or(1),
            support_size: kv.get("support_size")?,
            rank: kv.get("rank")?,
            partition: kv.get::<PartitionMode>("partition")?.unwrap_or(PartitionMode::Random),
            partition_u: kv.get("partition_u")?.unwrap_or(false),
            seed: kv.get("seed")?.unwrap_or(0),
            instances: kv.get("instances")?.unwrap_or(5),
            source,
            hyperparameters,
            metrics: kv.get_list::<Metric>("metrics")?.unwrap_or_else(|| vec![Metric::Rmse, Metric::Mnlp]),
            fgp_limit: kv.get("fgp_limit")?.unwrap_or(4096),
            results: kv.get::<String>("results")?.map(resolve),
            messages: kv.get::<String>("messages")?.map(resolve),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that the parameters fit the algorithm.
    pub fn validate(&self) -> Result<()> {
        let a = self.algorithm;
        if self.workers == 0 {
            return Err(config_error("workers must be at least 1".into()));
        }
        if self.instances == 0 {
            return Err(config_error("instances must be at least 1".into()));
        }
        match (a.uses_support(), self.support_size) {
            (true, None) => return Err(config_error(format!("{a} needs support_size"))),
            (true, Some(0)) => return Err(config_error("support_size must be positive".into())),
            (false, Some(_)) => return Err(config_error(format!("support_size does not apply to {a}"))),
            _ => {}
        }
        match (a.uses_rank(), self.rank) {
            (true, None) => return Err(config_error(format!("{a} needs rank"))),
            (true, Some(0)) => return Err(config_error("rank must be positive".into())),
            (false, Some(_)) => return Err(config_error(format!("rank does not apply to {a}"))),
            _ => {}
        }
        if self.partition_u && a != Algorithm::Picf {
            return Err(config_error(format!("partition_u does not apply to {a}")));
        }
        if let DataSource::Synthetic { n_train, dim, .. } = self.source {
            self.hyperparameters.check_dim(dim)?;
            if let Some(s) = self.support_size {
                if s > n_train {
                    return Err(GpError::Infeasible(format!("support_size {s} exceeds {n_train} training points")));
                }
            }
            if let Some(r) = self.rank {
                if r > n_train {
                    return Err(GpError::Infeasible(format!("rank {r} exceeds {n_train} training points")));
                }
            }
            if self.workers > n_train {
                return Err(GpError::Infeasible(format!("{} workers for {n_train} training points", self.workers)));
            }
        }
        Ok(())
    }

    /// Copy with one swept parameter replaced.
    pub fn with_axis(&self, axis: SweepAxis, value: usize) -> Result<Self> {
        let mut c = self.clone();
        match axis {
            SweepAxis::SupportSize => c.support_size = Some(value),
            SweepAxis::Rank => c.rank = Some(value),
            SweepAxis::Workers => c.workers = value,
        }
        c.validate()?;
        Ok(c)
    }
}

fn config_error(message: String) -> GpError {
    GpError::Config { line: 0, message }
}
