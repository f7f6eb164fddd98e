//! Exact Gaussian process posterior.

use nalgebra::DMatrix;

use crate::data::{centered_outputs, prior_means, Dataset};
use crate::error::{GpError, Result};
use crate::kernel::{cov_matrix, cov_symmetric, Hyperparameters};
use crate::linalg::{column_sq_norms, symmetrize, Factor};
use crate::predictive::{Covariance, PredictiveDistribution};

/// Posterior mean and (co)variance of `test` given `train`, via a Cholesky
/// factorization of `Σ_DD`.
pub fn fgp_predict(
    train: &Dataset,
    test: &Dataset,
    h: &Hyperparameters,
    want_full_cov: bool,
) -> Result<PredictiveDistribution> {
    if test.is_empty() {
        return Err(GpError::InvalidInput("test set is empty".into()));
    }
    if train.is_empty() {
        return Err(GpError::InvalidInput("training set is empty".into()));
    }
    let (mu_d, mu_u) = prior_means(train, test)?;
    let r = centered_outputs(train, &mu_d)?;

    let k_dd = cov_symmetric(train.inputs(), h)?;
    let chol = Factor::new(k_dd, "Sigma_DD")?;
    let k_du = cov_matrix(train.inputs(), test.inputs(), h)?;

    let alpha = chol.solve_vec(&r);
    let mean = mu_u + k_du.tr_mul(&alpha);
    let v = chol.half_solve(&k_du);

    let covariance = if want_full_cov {
        let mut c: DMatrix<f64> = cov_symmetric(test.inputs(), h)? - v.tr_mul(&v);
        symmetrize(&mut c);
        Covariance::Full(c)
    } else {
        let prior = h.prior_variance();
        Covariance::Variances(column_sq_norms(&v).into_iter().map(|q| prior - q).collect())
    };
    Ok(PredictiveDistribution::new(
        mean.iter().copied().collect(),
        covariance,
        test.ids(),
    ))
}
