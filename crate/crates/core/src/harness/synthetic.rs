use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{points_from_rows, Dataset, InputPoint, SetId};
use crate::error::{GpError, Result};
use crate::kernel::{cov_symmetric, Hyperparameters};
use crate::linalg::Factor;

/// Largest number of jointly sampled points. Sampling needs one dense
/// Cholesky factorization of that size.
pub const MAX_DENSE_SAMPLE: usize = 6000;

/// Draws noisy outputs from the zero-mean GP prior at fixed inputs.
#[derive(Clone, Debug)]
pub struct PriorSampler {
    chol: Factor,
}

impl PriorSampler {
    pub fn new(points: &[InputPoint], h: &Hyperparameters) -> Result<Self> {
        if points.len() > MAX_DENSE_SAMPLE {
            return Err(GpError::Infeasible(format!(
                "dense prior sampling of {} points (limit {MAX_DENSE_SAMPLE})",
                points.len()
            )));
        }
        let k = cov_symmetric(points, h)?;
        Ok(PriorSampler {
            chol: Factor::new(k, "prior covariance")?,
        })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.chol.dim();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (self.chol.l() * z).iter().copied().collect()
    }
}

/// Training and test sets with inputs uniform in `[0, 1]^d` and outputs
/// drawn jointly from the GP prior with hyperparameters `h`. The test set
/// keeps its outputs as ground truth.
pub fn generate_synthetic(
    n_train: usize,
    n_test: usize,
    d: usize,
    h: &Hyperparameters,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || d == 0 {
        return Err(GpError::InvalidInput("need at least one training point and one dimension".into()));
    }
    h.check_dim(d)?;
    if n_train + n_test > MAX_DENSE_SAMPLE {
        return Err(GpError::Infeasible(format!(
            "{} points requested, dense sampling is limited to {MAX_DENSE_SAMPLE}",
            n_train + n_test
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = |k: usize| -> Vec<Vec<f64>> {
        (0..k).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
    };
    let train_rows = rows(n_train);
    let test_rows = rows(n_test);
    let mut points = points_from_rows(SetId::TRAIN, train_rows.clone());
    points.extend(points_from_rows(SetId::TEST, test_rows.clone()));
    let y = PriorSampler::new(&points, h)?.draw(&mut rng);
    let train = Dataset::from_rows(SetId::TRAIN, train_rows, Some(y[..n_train].to_vec()))?;
    let test = Dataset::from_rows(SetId::TEST, test_rows, Some(y[n_train..].to_vec()))?;
    Ok((train, test))
}
