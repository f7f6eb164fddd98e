//! Parallel Gaussian process regression with low-rank summaries.
//!
//! The exact posterior ([`fgp_predict`]) is the reference for the
//! centralized approximations in [`centralized`], which in turn are the
//! reference for the distributed algorithms in [`parallel`].

pub mod centralized;
pub mod data;
pub mod error;
pub mod fullgp;
pub mod harness;
pub mod kernel;
pub mod keyvalue;
pub mod linalg;
pub mod parallel;
pub mod predictive;
pub mod support;

pub use centralized::{
    icf_factorize, icf_predict, pic_predict, pitc_predict, BlockStructure, IcfFactor,
};
pub use data::{Dataset, InputPoint, PointId, PriorMean, SetId};
pub use error::{GpError, Result};
pub use fullgp::fgp_predict;
pub use harness::{generate_synthetic, mnlp, rmse, run_experiment, Algorithm, ExperimentConfig, MetricsReport};
pub use kernel::{cov_matrix, covariance, Hyperparameters};
pub use parallel::{Engine, MessageLog, PartitionMode, Phase};
pub use predictive::{Covariance, PredictiveDistribution};
pub use support::{select_support, SupportSet};
