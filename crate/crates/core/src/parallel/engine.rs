//! The master/worker engine running pPITC, pPIC and the
//! incomplete-Cholesky algorithm over a fixed assignment of data.
//!
//! Each algorithm proceeds in supersteps. Within a superstep the workers
//! compute independently (and concurrently); their messages are then
//! delivered and logged in ascending worker order, and every reduction
//! consumes them in that order, so results do not depend on scheduling.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::icf::{
    global_phi, icf_local_summary, pick_global, predictive_component, solve_columns, DistributedFactor, FactorBlock,
    IcfGlobalSummary, IcfLocalSummary,
};
use super::partition::{block_structure, partition_random, recluster, WorkerAssignment};
use super::summary::{
    aggregate_global_summary, cross_block, local_terms, predict_local, support_factor, GlobalSummary,
    LocalSummary, SparseWorker, SupportContext,
};
use super::transport::{MessageLog, Phase, Transport, MASTER};
use crate::centralized::BlockStructure;
use crate::data::{prior_means, Dataset, InputPoint, PointId};
use crate::error::{GpError, Result};
use crate::kernel::{cov_symmetric, Hyperparameters};
use crate::linalg::{symmetrize, Factor};
use crate::predictive::{Covariance, PredictiveDistribution};
use crate::support::SupportSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PartitionMode {
    #[default]
    Random,
    /// Random, followed by one round of clustering.
    Clustered,
}

impl std::str::FromStr for PartitionMode {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PartitionMode::Random),
            "clustered" => Ok(PartitionMode::Clustered),
            other => Err(GpError::InvalidInput(format!("unknown partition mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PartitionMode::Random => "random",
            PartitionMode::Clustered => "clustered",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparseVariant {
    Pitc,
    Pic,
}

/// Worker states after the local summaries of pPITC or pPIC are computed.
#[derive(Clone, Debug)]
pub struct SparseLocal {
    variant: SparseVariant,
    support: SupportSet,
    s_fac: Factor,
    workers: Vec<SparseWorker>,
}

impl SparseLocal {
    pub fn variant(&self) -> SparseVariant {
        self.variant
    }

    pub fn summaries(&self) -> Vec<LocalSummary> {
        self.workers.iter().map(|w| w.summary.clone()).collect()
    }
}

/// Result of a pPITC or pPIC run. Keeps what the workers need to produce
/// off-diagonal blocks of the joint predictive covariance.
#[derive(Clone, Debug)]
pub struct SparseRun {
    pub prediction: PredictiveDistribution,
    pub global: GlobalSummary,
    variant: SparseVariant,
    support: SupportSet,
    s_fac: Factor,
    g_fac: Factor,
    tests: Vec<Vec<InputPoint>>,
    /// Right factors of the global term, per worker.
    right: Vec<DMatrix<f64>>,
}

impl SparseRun {
    pub fn variant(&self) -> SparseVariant {
        self.variant
    }
}

/// Result of an incomplete-Cholesky run.
#[derive(Clone, Debug)]
pub struct IcfRun {
    pub prediction: PredictiveDistribution,
    pub factor: DistributedFactor,
    pub locals: Vec<IcfLocalSummary>,
    pub global: IcfGlobalSummary,
}

/// M workers, one of which also hosts the master, over a fixed assignment
/// of training and test inputs.
#[derive(Debug)]
pub struct Engine {
    assignments: Vec<WorkerAssignment>,
    /// The full test set; the incomplete-Cholesky algorithm assumes every
    /// worker knows all test inputs.
    tests: Dataset,
    test_ids: Vec<PointId>,
    transport: Transport,
}

impl Engine {
    /// Engine over existing assignments; worker `m` must be at position `m`.
    pub fn new(assignments: Vec<WorkerAssignment>) -> Result<Engine> {
        if assignments.is_empty() {
            return Err(GpError::InvalidInput("an engine needs at least one worker".into()));
        }
        if let Some((pos, a)) = assignments.iter().enumerate().find(|(i, a)| a.worker != *i) {
            return Err(GpError::InvalidInput(format!("worker {} found at position {pos}", a.worker)));
        }
        let blocks = block_structure(&assignments)?;
        let n_test: usize = assignments.iter().map(WorkerAssignment::num_tests).sum();
        let mut slots: Vec<Option<(InputPoint, f64)>> = vec![None; n_test];
        for a in &assignments {
            let (_, mu_u) = prior_means(&a.local_data, &a.local_tests)?;
            for (k, &i) in a.test_indices.iter().enumerate() {
                slots[i] = Some((a.local_tests.inputs()[k].clone(), mu_u[k]));
            }
        }
        let (points, mu): (Vec<InputPoint>, Vec<f64>) = slots.into_iter().map(|s| s.expect("partition")).unzip();
        let test_ids = points.iter().map(|p| p.id).collect();
        let tests = Dataset::new(points, None)?.with_prior_mean(crate::data::PriorMean::PerPoint(mu))?;
        debug_assert_eq!(blocks.num_blocks(), assignments.len());
        let m = assignments.len();
        Ok(Engine {
            assignments,
            tests,
            test_ids,
            transport: Transport::new(m),
        })
    }

    /// Step 1: distributes the data over `m` workers. Clustering traffic is
    /// logged under [`Phase::Partition`]; the initial random placement is
    /// taken as given.
    pub fn partitioned(train: &Dataset, tests: &Dataset, m: usize, mode: PartitionMode, seed: u64) -> Result<Engine> {
        let initial = partition_random(train, tests, m, seed)?;
        match mode {
            PartitionMode::Random => Engine::new(initial),
            PartitionMode::Clustered => {
                let mut transport = Transport::new(m);
                let assignments = recluster(train, tests, &initial, seed, &mut transport)?;
                let mut engine = Engine::new(assignments)?;
                engine.transport = transport;
                Ok(engine)
            }
        }
    }

    pub fn workers(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[WorkerAssignment] {
        &self.assignments
    }

    pub fn block_structure(&self) -> Result<BlockStructure> {
        block_structure(&self.assignments)
    }

    pub fn log(&self) -> &MessageLog {
        self.transport.log()
    }

    pub fn take_log(&mut self) -> MessageLog {
        self.transport.take_log()
    }

    fn check_worker(&self, w: usize) -> Result<()> {
        if w < self.workers() {
            Ok(())
        } else {
            Err(GpError::UnknownWorker(w))
        }
    }

    /// Runs `f` on every worker, concurrently, and returns the results in
    /// worker order. The first failure is reported with its worker id.
    fn on_workers<T: Send>(&self, f: impl Fn(&WorkerAssignment) -> Result<T> + Sync) -> Result<Vec<T>> {
        self.assignments
            .par_iter()
            .map(|a| f(a).map_err(|e| e.in_worker(a.worker)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    /// Step 2: every worker summarizes its data against the support set and
    /// sends the summary to the master.
    pub fn sparse_local(&mut self, support: &SupportSet, h: &Hyperparameters, variant: SparseVariant) -> Result<SparseLocal> {
        let s_fac = support_factor(support, h)?;
        let with_tests = variant == SparseVariant::Pic;
        let workers = self.on_workers(|a| local_terms(a, support, &s_fac, h, with_tests))?;
        let ns = support.len();
        self.transport.gather(Phase::LocalSummary, MASTER, "y_dot_S", |_| ns);
        self.transport.gather(Phase::LocalSummary, MASTER, "Sigma_dot_SS", |_| ns * ns);
        Ok(SparseLocal {
            variant,
            support: support.clone(),
            s_fac,
            workers,
        })
    }

    /// Step 3: the master fuses the local summaries and broadcasts the
    /// result.
    pub fn sparse_global(&mut self, local: &SparseLocal, h: &Hyperparameters) -> Result<GlobalSummary> {
        let global = aggregate_global_summary(&local.summaries(), &local.support, h)?;
        let ns = local.support.len();
        self.transport.broadcast(Phase::GlobalSummary, MASTER, "y_ddot_S", ns);
        self.transport.broadcast(Phase::GlobalSummary, MASTER, "Sigma_ddot_SS", ns * ns);
        Ok(global)
    }

    /// Step 4: each worker predicts its own test inputs from `global`; the
    /// master collects and orders the results. With `want_full_cov` the
    /// off-diagonal blocks are produced through
    /// [`Engine::cross_block_covariance`].
    pub fn sparse_predict(
        &mut self,
        local: &SparseLocal,
        global: &GlobalSummary,
        h: &Hyperparameters,
        want_full_cov: bool,
    ) -> Result<SparseRun> {
        let g_fac = Factor::new(global.sigma_ddot_ss.clone(), "global Sigma_ddot_SS")?;
        let support = local.support.points();
        let ctx = SupportContext::new(support, &local.s_fac, &g_fac, global);
        let pic = local.variant == SparseVariant::Pic;
        let preds = self.on_workers(|a| predict_local(a, &local.workers[a.worker], &ctx, h, pic, want_full_cov))?;

        let n = self.tests.len();
        let mut mean = vec![0.0; n];
        let mut var = vec![0.0; n];
        for (a, p) in self.assignments.iter().zip(&preds) {
            let nu = a.num_tests();
            let scalars = if want_full_cov { nu + nu * nu } else { 2 * nu };
            self.transport.send(Phase::Collect, a.worker, MASTER, "prediction", scalars);
            for (k, &i) in a.test_indices.iter().enumerate() {
                mean[i] = p.mean[k];
                var[i] = p.variances[k];
            }
        }
        let mut run = SparseRun {
            prediction: PredictiveDistribution::new(mean, Covariance::Variances(var), self.test_ids.clone()),
            global: global.clone(),
            variant: local.variant,
            support: local.support.clone(),
            s_fac: local.s_fac.clone(),
            g_fac,
            tests: self.assignments.iter().map(|a| a.local_tests.inputs().to_vec()).collect(),
            right: preds.iter().map(|p| p.right.clone()).collect(),
        };
        if want_full_cov {
            let mut full = DMatrix::zeros(n, n);
            for (a, p) in self.assignments.iter().zip(&preds) {
                let block = p.block.as_ref().expect("full block requested");
                place(&mut full, &a.test_indices, &a.test_indices, block);
            }
            for i in 0..self.workers() {
                for j in (i + 1)..self.workers() {
                    let block = self.cross_block_covariance(&run, i, j, h)?;
                    let (ri, rj) = (&self.assignments[i].test_indices, &self.assignments[j].test_indices);
                    self.transport.send(Phase::Collect, i, MASTER, "cross_block", ri.len() * rj.len());
                    place(&mut full, ri, rj, &block);
                    place(&mut full, rj, ri, &block.transpose());
                }
            }
            symmetrize(&mut full);
            run.prediction = PredictiveDistribution::new(run.prediction.mean, Covariance::Full(full), self.test_ids.clone());
        }
        Ok(run)
    }

    fn sparse_predict_all(
        &mut self,
        support: &SupportSet,
        h: &Hyperparameters,
        want_full_cov: bool,
        variant: SparseVariant,
    ) -> Result<SparseRun> {
        let local = self.sparse_local(support, h, variant)?;
        let global = self.sparse_global(&local, h)?;
        self.sparse_predict(&local, &global, h, want_full_cov)
    }

    /// pPITC: Steps 2 to 4 over the current assignment.
    pub fn ppitc_predict(&mut self, support: &SupportSet, h: &Hyperparameters, want_full_cov: bool) -> Result<SparseRun> {
        self.sparse_predict_all(support, h, want_full_cov, SparseVariant::Pitc)
    }

    /// pPIC: as pPITC, with each worker also using its local data for its
    /// own test inputs.
    pub fn ppic_predict(&mut self, support: &SupportSet, h: &Hyperparameters, want_full_cov: bool) -> Result<SparseRun> {
        self.sparse_predict_all(support, h, want_full_cov, SparseVariant::Pic)
    }

    /// Predictive covariance between the test inputs of workers `i` and
    /// `j`, computed on worker `i` after receiving worker `j`'s test inputs
    /// (and, for pPIC, its `Φ_{S U_j}`).
    pub fn cross_block_covariance(&mut self, run: &SparseRun, i: usize, j: usize, h: &Hyperparameters) -> Result<DMatrix<f64>> {
        self.check_worker(i)?;
        self.check_worker(j)?;
        if i == j {
            return Err(GpError::InvalidInput(format!(
                "cross-block covariance needs two distinct workers, got {i} twice"
            )));
        }
        let u_j = &run.tests[j];
        let d = self.tests.dim();
        self.transport.send(Phase::CrossCovariance, j, i, "U_j", u_j.len() * d);
        if run.variant == SparseVariant::Pic {
            self.transport.send(Phase::CrossCovariance, j, i, "Phi_SU_j", u_j.len() * run.support.len());
        }
        let ctx = SupportContext::new(run.support.points(), &run.s_fac, &run.g_fac, &run.global);
        cross_block(&run.tests[i], &run.right[i], u_j, &run.right[j], &ctx, h).map_err(|e| e.in_worker(i))
    }

    /// Step 2 of the incomplete-Cholesky algorithm: one pivot per round.
    /// The workers report their best residual, the master picks the global
    /// maximum and announces it, and the owner broadcasts the pivot's
    /// features and factor column so every worker can extend its rows.
    pub fn distributed_icf(&mut self, h: &Hyperparameters, rank: usize) -> Result<DistributedFactor> {
        let n: usize = self.assignments.iter().map(WorkerAssignment::num_train).sum();
        if rank == 0 || rank > n {
            return Err(GpError::InvalidInput(format!("rank {rank} must be in 1..={n}")));
        }
        for a in &self.assignments {
            h.check_dim(a.local_data.dim()).map_err(|e| e.in_worker(a.worker))?;
        }
        let d = self.assignments[0].local_data.dim();
        let mut blocks: Vec<FactorBlock> = self.assignments.iter().map(|a| FactorBlock::new(a, rank, h)).collect();
        let mut pivots = Vec::with_capacity(rank);
        for k in 0..rank {
            let candidates: Vec<Option<(f64, usize)>> = blocks.iter().map(FactorBlock::candidate).collect();
            self.transport.gather(Phase::Factorize, MASTER, "pivot_candidate", |_| 2);
            let (owner, global) = pick_global(&candidates).expect("rank <= |D|");
            self.transport.broadcast(Phase::Factorize, MASTER, "pivot_index", 1);
            let (pivot, col) = blocks[owner].take_pivot(global, k).map_err(|e| e.in_worker(owner))?;
            self.transport.broadcast(Phase::Factorize, owner, "pivot_column", 1 + d + k);
            let a = &self.assignments[owner];
            let local = a.train_indices.iter().position(|&g| g == global).expect("owned");
            let x_p = a.local_data.inputs()[local].clone();
            pivots.push(global);
            blocks.par_iter_mut().zip(&self.assignments).for_each(|(b, a)| {
                b.update(a.local_data.inputs(), &x_p, pivot, &col, k, h);
            });
        }
        Ok(DistributedFactor { blocks, pivots })
    }

    /// Steps 2 to 6 of the incomplete-Cholesky algorithm. With
    /// `partition_u` the global `Σ̈` is computed in slices: worker `i` sums
    /// the columns of its own test inputs and shares the result.
    pub fn picf_predict(
        &mut self,
        h: &Hyperparameters,
        rank: usize,
        partition_u: bool,
        want_full_cov: bool,
    ) -> Result<IcfRun> {
        let factor = self.distributed_icf(h, rank)?;
        self.picf_with_factor(factor, h, partition_u, want_full_cov)
    }

    /// Steps 3 to 6 given an already distributed factor.
    pub fn picf_with_factor(
        &mut self,
        factor: DistributedFactor,
        h: &Hyperparameters,
        partition_u: bool,
        want_full_cov: bool,
    ) -> Result<IcfRun> {
        let nu = self.tests.len();
        if nu == 0 {
            return Err(GpError::InvalidInput("test set is empty".into()));
        }
        if factor.blocks.len() != self.workers() {
            return Err(GpError::InvalidInput("factor blocks do not match the workers".into()));
        }
        let rank = factor.rank();
        let tests = &self.tests;
        // Step 3.
        let computed = self.on_workers(|a| icf_local_summary(a, &factor.blocks[a.worker], tests, h))?;
        let locals: Vec<IcfLocalSummary> = computed.iter().map(|c| c.0.clone()).collect();
        self.transport.gather(Phase::LocalSummary, MASTER, "y_dot", |_| rank);
        self.transport.gather(Phase::LocalSummary, MASTER, "Phi_m", |_| rank * rank);

        // Step 4.
        let refs: Vec<&IcfLocalSummary> = locals.iter().collect();
        let phi = global_phi(&refs, h);
        let phi_fac = Factor::new(phi.clone(), "Phi = I + F F^T / noise")?;
        let mut y_sum = DVector::zeros(rank);
        for l in &locals {
            y_sum += &l.y_dot;
        }
        let y_ddot = phi_fac.solve_vec(&y_sum);
        let sigma_ddot = if partition_u {
            self.transport.broadcast(Phase::GlobalSummary, MASTER, "Phi", rank * rank);
            self.transport.broadcast(Phase::GlobalSummary, MASTER, "y_ddot", rank);
            for a in &self.assignments {
                for b in &self.assignments {
                    self.transport.send(Phase::SigmaDot, a.worker, b.worker, "Sigma_dot_m^i", rank * b.num_tests());
                }
            }
            let slices = self.on_workers(|b| {
                let mut sum = DMatrix::zeros(rank, b.num_tests());
                for l in &locals {
                    sum += l.sigma_dot.select_columns(&b.test_indices);
                }
                Ok(solve_columns(&phi_fac, &sum))
            })?;
            let sizes: Vec<usize> = self.assignments.iter().map(|b| rank * b.num_tests()).collect();
            self.transport.allgather(Phase::GlobalSummary, "Sigma_ddot_i", |i| sizes[i]);
            let mut full = DMatrix::zeros(rank, nu);
            for (b, slice) in self.assignments.iter().zip(&slices) {
                for (k, &i) in b.test_indices.iter().enumerate() {
                    full.set_column(i, &slice.column(k));
                }
            }
            full
        } else {
            self.transport.gather(Phase::SigmaDot, MASTER, "Sigma_dot_m", |_| rank * nu);
            let mut sum = DMatrix::zeros(rank, nu);
            for l in &locals {
                sum += &l.sigma_dot;
            }
            let s = solve_columns(&phi_fac, &sum);
            self.transport.broadcast(Phase::GlobalSummary, MASTER, "y_ddot", rank);
            self.transport.broadcast(Phase::GlobalSummary, MASTER, "Sigma_ddot", rank * nu);
            s
        };
        let global = IcfGlobalSummary { y_ddot, sigma_ddot, phi };

        // Step 5.
        let comps: Vec<_> = computed
            .par_iter()
            .map(|(l, k_du, r)| predictive_component(l, k_du, r, &global, h, want_full_cov))
            .collect();
        let per = if want_full_cov { nu + nu * nu } else { 2 * nu };
        self.transport.gather(Phase::Predict, MASTER, "predictive_component", |_| per);

        // Step 6.
        let (_, mu_u) = prior_means(&self.assignments[0].local_data, tests)?;
        let mut mean = mu_u;
        for (m, _, _) in &comps {
            mean += m;
        }
        let covariance = if want_full_cov {
            let mut c = cov_symmetric(tests.inputs(), h)?;
            for (_, _, b) in &comps {
                c -= b.as_ref().expect("full block");
            }
            symmetrize(&mut c);
            Covariance::Full(c)
        } else {
            let mut v = vec![h.prior_variance(); nu];
            for (_, vm, _) in &comps {
                for (a, b) in v.iter_mut().zip(vm) {
                    *a -= b;
                }
            }
            Covariance::Variances(v)
        };
        Ok(IcfRun {
            prediction: PredictiveDistribution::new(mean.iter().copied().collect(), covariance, self.test_ids.clone()),
            factor,
            locals,
            global,
        })
    }
}

fn place(full: &mut DMatrix<f64>, rows: &[usize], cols: &[usize], block: &DMatrix<f64>) {
    for (bi, &i) in rows.iter().enumerate() {
        for (bj, &j) in cols.iter().enumerate() {
            full[(i, j)] = block[(bi, bj)];
        }
    }
}
