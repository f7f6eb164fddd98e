//! Support-set summaries of the workers' data and the worker-side
//! pPITC/pPIC predictive equations.

use nalgebra::{DMatrix, DVector};

use super::partition::WorkerAssignment;
use crate::data::{centered_outputs, prior_means, InputPoint};
use crate::error::{GpError, Result};
use crate::kernel::{cov_matrix, cov_symmetric, Hyperparameters};
use crate::linalg::{column_sq_norms, diag_of_mul_tr, symmetrize, Factor};
use crate::support::SupportSet;

/// What one worker contributes to the global summary.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSummary {
    pub owner: usize,
    /// `Σ_{S D_m} Σ_{D_m D_m|S}⁻¹ (y_{D_m} − μ_{D_m})`.
    pub y_dot_s: DVector<f64>,
    /// `Σ_{S D_m} Σ_{D_m D_m|S}⁻¹ Σ_{D_m S}`.
    pub sigma_dot_ss: DMatrix<f64>,
}

impl LocalSummary {
    pub fn support_size(&self) -> usize {
        self.y_dot_s.len()
    }
}

/// The master's fusion of all local summaries, sent back to every worker.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalSummary {
    pub y_ddot_s: DVector<f64>,
    /// `Σ_SS` plus the sum of the local `Σ̇_SS`.
    pub sigma_ddot_ss: DMatrix<f64>,
}

impl GlobalSummary {
    pub fn support_size(&self) -> usize {
        self.y_ddot_s.len()
    }
}

/// Terms a pPIC worker keeps for its own test inputs. They are derived from
/// local data only and never leave the worker.
#[derive(Clone, Debug)]
pub(crate) struct TestTerms {
    /// `ẏ_{U_m}`.
    y_dot_u: DVector<f64>,
    /// `Σ̇_{U_m S}`.
    sigma_dot_us: DMatrix<f64>,
    /// `Σ̇_{U_m U_m}`.
    sigma_dot_uu: DMatrix<f64>,
}

/// A worker's state after computing its summary.
#[derive(Clone, Debug)]
pub(crate) struct SparseWorker {
    pub summary: LocalSummary,
    pub tests: Option<TestTerms>,
}

/// Local summary of one worker's data.
pub fn compute_local_summary(w: &WorkerAssignment, support: &SupportSet, h: &Hyperparameters) -> Result<LocalSummary> {
    let s_fac = support_factor(support, h)?;
    Ok(local_terms(w, support, &s_fac, h, false)?.summary)
}

pub(crate) fn support_factor(support: &SupportSet, h: &Hyperparameters) -> Result<Factor> {
    Factor::new(cov_symmetric(support.points(), h)?, "Sigma_SS")
}

pub(crate) fn local_terms(
    w: &WorkerAssignment,
    support: &SupportSet,
    s_fac: &Factor,
    h: &Hyperparameters,
    with_tests: bool,
) -> Result<SparseWorker> {
    let s = support.points();
    let ns = s.len();
    let nu = w.num_tests();
    if w.local_data.is_empty() {
        return Err(GpError::InvalidInput(format!("worker {} holds no training data", w.worker)));
    }
    let (mu_d, _) = prior_means(&w.local_data, &w.local_tests)?;
    let r = centered_outputs(&w.local_data, &mu_d)?;
    let dm = w.local_data.inputs();

    let k_sd = cov_matrix(s, dm, h)?;
    let a = s_fac.half_solve(&k_sd);
    let mut lam = cov_symmetric(dm, h)? - a.tr_mul(&a);
    symmetrize(&mut lam);
    let lam = Factor::new(lam, "Sigma_DmDm|S")?;
    let b = lam.half_solve(&k_sd.transpose());
    let c = lam.half_solve_vec(&r);
    let y_dot_s = b.tr_mul(&c);
    let mut sigma_dot_ss = b.tr_mul(&b);
    symmetrize(&mut sigma_dot_ss);
    debug_assert_eq!(y_dot_s.len(), ns);

    let tests = if with_tests && nu > 0 {
        let g = lam.half_solve(&cov_matrix(dm, w.local_tests.inputs(), h)?);
        let mut sigma_dot_uu = g.tr_mul(&g);
        symmetrize(&mut sigma_dot_uu);
        Some(TestTerms {
            y_dot_u: g.tr_mul(&c),
            sigma_dot_us: g.tr_mul(&b),
            sigma_dot_uu,
        })
    } else {
        None
    };
    Ok(SparseWorker {
        summary: LocalSummary {
            owner: w.worker,
            y_dot_s,
            sigma_dot_ss,
        },
        tests,
    })
}

fn check_sizes<'a>(ns: usize, locals: impl IntoIterator<Item = &'a LocalSummary>) -> Result<()> {
    for l in locals {
        if l.y_dot_s.len() != ns || l.sigma_dot_ss.shape() != (ns, ns) {
            return Err(GpError::DimensionMismatch {
                expected: ns,
                found: l.y_dot_s.len(),
            });
        }
    }
    Ok(())
}

/// Local summaries ordered by owner; duplicate owners are rejected.
fn by_owner(locals: &[LocalSummary]) -> Result<Vec<&LocalSummary>> {
    let mut sorted: Vec<&LocalSummary> = locals.iter().collect();
    sorted.sort_by_key(|l| l.owner);
    if let Some(w) = sorted.windows(2).find(|w| w[0].owner == w[1].owner) {
        return Err(GpError::InvalidInput(format!("two local summaries from worker {}", w[0].owner)));
    }
    Ok(sorted)
}

/// Sums the local summaries in ascending owner order and adds `Σ_SS`.
pub fn aggregate_global_summary(
    locals: &[LocalSummary],
    support: &SupportSet,
    h: &Hyperparameters,
) -> Result<GlobalSummary> {
    let ns = support.len();
    check_sizes(ns, locals)?;
    let start = GlobalSummary {
        y_ddot_s: DVector::zeros(ns),
        sigma_ddot_ss: cov_symmetric(support.points(), h)?,
    };
    assimilate_new_data(&start, locals)
}

/// Adds the summaries of newly arrived data to an existing global summary.
/// Since the global summary is a plain sum, this equals aggregating all
/// local summaries at once.
pub fn assimilate_new_data(existing: &GlobalSummary, new_locals: &[LocalSummary]) -> Result<GlobalSummary> {
    let ns = existing.support_size();
    if existing.sigma_ddot_ss.shape() != (ns, ns) {
        return Err(GpError::DimensionMismatch {
            expected: ns,
            found: existing.sigma_ddot_ss.nrows(),
        });
    }
    check_sizes(ns, new_locals)?;
    let mut out = existing.clone();
    for l in by_owner(new_locals)? {
        out.y_ddot_s += &l.y_dot_s;
        out.sigma_ddot_ss += &l.sigma_dot_ss;
    }
    Ok(out)
}

/// Quantities every worker derives from the support set and the global
/// summary before predicting.
pub(crate) struct SupportContext<'a> {
    pub support: &'a [InputPoint],
    pub s_fac: &'a Factor,
    pub g_fac: &'a Factor,
    /// `L_{Σ̈}⁻¹ ÿ_S`.
    pub g_half_y: DVector<f64>,
}

impl<'a> SupportContext<'a> {
    pub fn new(support: &'a [InputPoint], s_fac: &'a Factor, g_fac: &'a Factor, global: &'a GlobalSummary) -> Self {
        SupportContext {
            support,
            s_fac,
            g_fac,
            g_half_y: g_fac.half_solve_vec(&global.y_ddot_s),
        }
    }
}

/// A worker's prediction for its own test inputs.
pub(crate) struct LocalPrediction {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
    pub block: Option<DMatrix<f64>>,
    /// `Φ_{S U_m}` for pPIC, `Σ_{S U_m}` for pPITC: the right factor of the
    /// global term of the cross-block covariances.
    pub right: DMatrix<f64>,
}

/// Mean and (co)variance for the worker's tests: the pPIC equations with
/// the worker's local terms when `pic` is set, pPITC otherwise.
pub(crate) fn predict_local(
    w: &WorkerAssignment,
    worker: &SparseWorker,
    ctx: &SupportContext<'_>,
    h: &Hyperparameters,
    pic: bool,
    full: bool,
) -> Result<LocalPrediction> {
    let u = w.local_tests.inputs();
    let nu = u.len();
    let ns = ctx.support.len();
    if nu == 0 {
        return Ok(LocalPrediction {
            mean: vec![],
            variances: vec![],
            block: full.then(|| DMatrix::zeros(0, 0)),
            right: DMatrix::zeros(ns, 0),
        });
    }
    let (_, mu_u) = prior_means(&w.local_data, &w.local_tests)?;
    let k_su = cov_matrix(ctx.support, u, h)?;
    let a = ctx.s_fac.half_solve(&k_su);

    // The matrix whose columns are multiplied by Σ̈⁻¹ on both sides.
    let (right, mean_local, var_local, block_local) = if pic {
        let t = worker.tests.as_ref().expect("pPIC worker terms");
        let l = &worker.summary;
        // αᵀ = Σ_SS⁻¹ Σ_{S U_m}
        let alpha_t = ctx.s_fac.solve(&k_su);
        // Φ_{S U_m} = Σ_{S U_m} + Σ̇_SS Σ_SS⁻¹ Σ_{S U_m} − Σ̇_{S U_m}
        let phi_su = &k_su + &l.sigma_dot_ss * &alpha_t - t.sigma_dot_us.transpose();
        let mean = t.y_dot_u.clone() - alpha_t.tr_mul(&l.y_dot_s);
        // −Φ αᵀ + α Σ̇_{S U_m} − Σ̇_{U_m U_m}
        let var: Vec<f64> = diag_of_tr_mul_pairs(&phi_su, &alpha_t, &t.sigma_dot_us, &t.sigma_dot_uu);
        let block = full.then(|| {
            -phi_su.tr_mul(&alpha_t) + alpha_t.tr_mul(&t.sigma_dot_us.transpose()) - &t.sigma_dot_uu
        });
        (phi_su, Some(mean), Some(var), block)
    } else {
        (k_su, None, None, None)
    };
    let q = ctx.g_fac.half_solve(&right);

    let mut mean = mu_u + q.tr_mul(&ctx.g_half_y);
    if let Some(m) = mean_local {
        mean += m;
    }
    let prior = h.prior_variance();
    let mut variances: Vec<f64> = if pic {
        let extra = var_local.expect("pPIC variance terms");
        column_sq_norms(&q)
            .into_iter()
            .zip(extra)
            .map(|(g, e)| prior + e + g)
            .collect()
    } else {
        column_sq_norms(&a)
            .into_iter()
            .zip(column_sq_norms(&q))
            .map(|(s, g)| prior - s + g)
            .collect()
    };
    let block = if full {
        let mut c = cov_symmetric(u, h)? + q.tr_mul(&q);
        match block_local {
            Some(b) => c += b,
            None => c -= a.tr_mul(&a),
        }
        symmetrize(&mut c);
        variances = c.diagonal().iter().copied().collect();
        Some(c)
    } else {
        None
    };
    Ok(LocalPrediction {
        mean: mean.iter().copied().collect(),
        variances,
        block,
        right,
    })
}

/// Diagonal of `−Φ αᵀ + α Σ̇_{S U} − Σ̇_{U U}` with `Φ`, `αᵀ` and `Σ̇_{SU}`
/// stored column per test input.
fn diag_of_tr_mul_pairs(
    phi_su: &DMatrix<f64>,
    alpha_t: &DMatrix<f64>,
    sigma_dot_us: &DMatrix<f64>,
    sigma_dot_uu: &DMatrix<f64>,
) -> Vec<f64> {
    let pa = crate::linalg::diag_of_tr_mul(phi_su, alpha_t);
    let ad = diag_of_mul_tr(&alpha_t.transpose(), sigma_dot_us);
    pa.iter()
        .zip(&ad)
        .enumerate()
        .map(|(i, (p, a))| -p + a - sigma_dot_uu[(i, i)])
        .collect()
}

/// Off-diagonal block `Σ̂_{U_i U_j}` computed on worker `i` from the test
/// inputs of worker `j` and, for pPIC, `Φ_{S U_j}`.
pub(crate) fn cross_block(
    u_i: &[InputPoint],
    right_i: &DMatrix<f64>,
    u_j: &[InputPoint],
    right_j: &DMatrix<f64>,
    ctx: &SupportContext<'_>,
    h: &Hyperparameters,
) -> Result<DMatrix<f64>> {
    if u_i.is_empty() || u_j.is_empty() {
        return Ok(DMatrix::zeros(u_i.len(), u_j.len()));
    }
    let a_i = ctx.s_fac.half_solve(&cov_matrix(ctx.support, u_i, h)?);
    let a_j = ctx.s_fac.half_solve(&cov_matrix(ctx.support, u_j, h)?);
    let q_i = ctx.g_fac.half_solve(right_i);
    let q_j = ctx.g_fac.half_solve(right_j);
    Ok(cov_matrix(u_i, u_j, h)? - a_i.tr_mul(&a_j) + q_i.tr_mul(&q_j))
}
