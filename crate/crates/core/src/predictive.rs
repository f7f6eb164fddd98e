use nalgebra::DMatrix;

use crate::data::PointId;

#[derive(Clone, Debug, PartialEq)]
pub enum Covariance {
    Variances(Vec<f64>),
    Full(DMatrix<f64>),
}

/// Gaussian predictive distribution over a list of test inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    /// False when some predictive variance is negative. Only the
    /// incomplete-Cholesky predictors can produce that.
    pub psd_valid: bool,
    /// Most negative variance seen when `psd_valid` is false.
    pub min_variance: Option<f64>,
    pub ordering: Vec<PointId>,
}

impl PredictiveDistribution {
    pub(crate) fn new(mean: Vec<f64>, covariance: Covariance, ordering: Vec<PointId>) -> Self {
        debug_assert_eq!(mean.len(), ordering.len());
        let mut out = PredictiveDistribution {
            mean,
            covariance,
            psd_valid: true,
            min_variance: None,
            ordering,
        };
        out.flag_negative_variances();
        out
    }

    fn flag_negative_variances(&mut self) {
        let min = self
            .variances()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            self.psd_valid = false;
            self.min_variance = Some(min);
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn variances(&self) -> Vec<f64> {
        match &self.covariance {
            Covariance::Variances(v) => v.clone(),
            Covariance::Full(m) => m.diagonal().iter().copied().collect(),
        }
    }

    pub fn full_covariance(&self) -> Option<&DMatrix<f64>> {
        match &self.covariance {
            Covariance::Full(m) => Some(m),
            Covariance::Variances(_) => None,
        }
    }

    pub fn negative_variance_count(&self) -> usize {
        self.variances().iter().filter(|&&v| v < 0.0).count()
    }

    /// Largest absolute difference in means and in variances.
    pub fn max_abs_diff(&self, other: &PredictiveDistribution) -> (f64, f64) {
        let dm = max_abs(&self.mean, &other.mean);
        let dv = max_abs(&self.variances(), &other.variances());
        (dm, dv)
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
