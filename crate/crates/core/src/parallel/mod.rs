//! Distributed pPITC, pPIC and incomplete-Cholesky predictors on a
//! deterministic master/worker engine with logged communication.

mod engine;
mod icf;
mod partition;
mod summary;
mod transport;

pub use engine::{Engine, IcfRun, PartitionMode, SparseLocal, SparseRun, SparseVariant};
pub use icf::{DistributedFactor, FactorBlock, IcfGlobalSummary, IcfLocalSummary};
pub use partition::{assign_blocks, block_structure, partition_clustered, partition_random, recluster, WorkerAssignment};
pub use summary::{aggregate_global_summary, assimilate_new_data, compute_local_summary, GlobalSummary, LocalSummary};
pub use transport::{message_totals, tree_depth, MessageLog, MessageRecord, Phase, Totals, Transport, MASTER, SCALAR_BYTES};
