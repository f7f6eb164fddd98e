//! Row-by-row incomplete Cholesky over distributed columns, and the
//! worker-side summaries of the incomplete-Cholesky predictor.

use nalgebra::{DMatrix, DVector};

use super::partition::WorkerAssignment;
use crate::centralized::{factor_entry, pivot_value, target_diagonal, IcfFactor};
use crate::data::{centered_outputs, prior_means, Dataset, InputPoint};
use crate::error::{GpError, Result};
use crate::kernel::{cov_matrix, signal_covariance, Hyperparameters};
use crate::linalg::{column_sq_norms, diag_of_tr_mul, symmetrize, Factor};

/// Column block `F_m` of the factor and the matching residual diagonal,
/// as stored on one worker.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorBlock {
    pub owner: usize,
    pub train_indices: Vec<usize>,
    pub columns: DMatrix<f64>,
    pub residual: Vec<f64>,
    pivoted: Vec<bool>,
}

impl FactorBlock {
    pub(crate) fn new(w: &WorkerAssignment, rank: usize, h: &Hyperparameters) -> Self {
        let n = w.num_train();
        FactorBlock {
            owner: w.worker,
            train_indices: w.train_indices.clone(),
            columns: DMatrix::zeros(rank, n),
            residual: vec![target_diagonal(h); n],
            pivoted: vec![false; n],
        }
    }

    /// Largest unpivoted residual and its global index; ties go to the
    /// lowest global index.
    pub(crate) fn candidate(&self) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (j, (&r, &g)) in self.residual.iter().zip(&self.train_indices).enumerate() {
            if self.pivoted[j] {
                continue;
            }
            match best {
                Some((br, bg)) if br > r || (br == r && bg < g) => {}
                _ => best = Some((r, g)),
            }
        }
        best
    }

    fn local_index(&self, global: usize) -> Option<usize> {
        self.train_indices.iter().position(|&g| g == global)
    }

    /// Marks the pivot as taken and returns its value and `F[..k, p]`.
    pub(crate) fn take_pivot(&mut self, global: usize, k: usize) -> Result<(f64, Vec<f64>)> {
        let p = self.local_index(global).expect("pivot owned by this worker");
        let pivot = pivot_value(self.residual[p], k)?;
        self.pivoted[p] = true;
        self.residual[p] = 0.0;
        self.columns[(k, p)] = pivot;
        let col = self.columns.column(p).rows(0, k).iter().copied().collect();
        Ok((pivot, col))
    }

    /// Row `k` of the local columns given the broadcast pivot.
    pub(crate) fn update(
        &mut self,
        local: &[InputPoint],
        x_p: &InputPoint,
        pivot: f64,
        col_p: &[f64],
        k: usize,
        h: &Hyperparameters,
    ) {
        if pivot == 0.0 {
            return;
        }
        for j in 0..self.train_indices.len() {
            if self.pivoted[j] {
                continue;
            }
            let target = signal_covariance(&local[j], x_p, h);
            let v = factor_entry(target, &self.columns.column(j).as_slice()[..k], col_p, pivot);
            self.columns[(k, j)] = v;
            self.residual[j] -= v * v;
        }
    }
}

/// The factor spread over the workers, plus the pivots in the order chosen.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributedFactor {
    pub blocks: Vec<FactorBlock>,
    pub pivots: Vec<usize>,
}

impl DistributedFactor {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// The full factor with columns in training order.
    pub fn assemble(&self) -> Result<IcfFactor> {
        let n: usize = self.blocks.iter().map(|b| b.train_indices.len()).sum();
        let mut f = DMatrix::zeros(self.rank(), n);
        let mut residual = vec![0.0; n];
        let mut pivoted = vec![false; n];
        for b in &self.blocks {
            for (j, &g) in b.train_indices.iter().enumerate() {
                if g >= n {
                    return Err(GpError::InvalidInput(format!("training index {g} out of range")));
                }
                f.set_column(g, &b.columns.column(j));
                residual[g] = b.residual[j];
            }
        }
        let mut order = self.pivots.clone();
        for &p in &order {
            pivoted[p] = true;
        }
        order.extend((0..n).filter(|&i| !pivoted[i]));
        IcfFactor::from_parts(f, order, residual)
    }
}

pub(crate) fn pick_global(candidates: &[Option<(f64, usize)>]) -> Option<(usize, usize)> {
    // (worker, global index) of the best candidate, scanning workers in
    // ascending order.
    let mut best: Option<(f64, usize, usize)> = None;
    for (w, c) in candidates.iter().enumerate() {
        if let Some((r, g)) = *c {
            match best {
                Some((br, bg, _)) if br > r || (br == r && bg < g) => {}
                _ => best = Some((r, g, w)),
            }
        }
    }
    best.map(|(_, g, w)| (w, g))
}

/// `(ẏ_m, Σ̇_m, Φ_m)` of one worker.
#[derive(Clone, Debug, PartialEq)]
pub struct IcfLocalSummary {
    pub owner: usize,
    /// `F_m (y_{D_m} − μ_{D_m})`.
    pub y_dot: DVector<f64>,
    /// `F_m Σ_{D_m U}`, `R × |U|`.
    pub sigma_dot: DMatrix<f64>,
    /// `F_m F_mᵀ`.
    pub phi: DMatrix<f64>,
}

/// `(ÿ, Σ̈)` and the matrix `Φ` they were solved with.
#[derive(Clone, Debug, PartialEq)]
pub struct IcfGlobalSummary {
    pub y_ddot: DVector<f64>,
    pub sigma_ddot: DMatrix<f64>,
    /// `I + σ_n⁻² Σ Φ_m`.
    pub phi: DMatrix<f64>,
}

pub(crate) fn icf_local_summary(
    w: &WorkerAssignment,
    block: &FactorBlock,
    tests: &Dataset,
    h: &Hyperparameters,
) -> Result<(IcfLocalSummary, DMatrix<f64>, DVector<f64>)> {
    let (mu_d, _) = prior_means(&w.local_data, tests)?;
    let r = centered_outputs(&w.local_data, &mu_d)?;
    let f = &block.columns;
    let k_du = cov_matrix(w.local_data.inputs(), tests.inputs(), h)?;
    let mut phi = f * f.transpose();
    symmetrize(&mut phi);
    let summary = IcfLocalSummary {
        owner: w.worker,
        y_dot: f * &r,
        sigma_dot: f * &k_du,
        phi,
    };
    Ok((summary, k_du, r))
}

/// `Φ = I + σ_n⁻² Σ Φ_m`, summed in ascending owner order.
pub(crate) fn global_phi(locals: &[&IcfLocalSummary], h: &Hyperparameters) -> DMatrix<f64> {
    let r = locals[0].phi.nrows();
    let mut sum = DMatrix::zeros(r, r);
    for l in locals {
        sum += &l.phi;
    }
    let mut phi = sum / h.noise_variance();
    for i in 0..r {
        phi[(i, i)] += 1.0;
    }
    phi
}

/// `Φ⁻¹ B` solved column by column, so that any subset of columns gives
/// the same bits as the full solve.
pub(crate) fn solve_columns(phi: &Factor, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(b.nrows(), b.ncols());
    for (j, col) in b.column_iter().enumerate() {
        out.set_column(j, &phi.solve_vec(&col.into_owned()));
    }
    out
}

/// Predictive component of one worker: mean contribution and either the
/// variance contributions or the full `|U| × |U|` block.
pub(crate) fn predictive_component(
    local: &IcfLocalSummary,
    k_du: &DMatrix<f64>,
    r: &DVector<f64>,
    global: &IcfGlobalSummary,
    h: &Hyperparameters,
    full: bool,
) -> (DVector<f64>, Vec<f64>, Option<DMatrix<f64>>) {
    let s2 = 1.0 / h.noise_variance();
    let s4 = s2 * s2;
    let mean = k_du.tr_mul(r) * s2 - local.sigma_dot.tr_mul(&global.y_ddot) * s4;
    if full {
        let block = k_du.tr_mul(k_du) * s2 - local.sigma_dot.tr_mul(&global.sigma_ddot) * s4;
        let var = block.diagonal().iter().copied().collect();
        (mean, var, Some(block))
    } else {
        let var = column_sq_norms(k_du)
            .into_iter()
            .zip(diag_of_tr_mul(&local.sigma_dot, &global.sigma_ddot))
            .map(|(a, b)| a * s2 - b * s4)
            .collect();
        (mean, var, None)
    }
}
