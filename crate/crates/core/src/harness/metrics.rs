use std::f64::consts::PI;

use crate::error::{GpError, Result};
use crate::predictive::PredictiveDistribution;

fn check_len(pred: usize, truth: usize) -> Result<()> {
    if pred != truth {
        return Err(GpError::DimensionMismatch {
            expected: pred,
            found: truth,
        });
    }
    if pred == 0 {
        return Err(GpError::InvalidInput("no predictions to score".into()));
    }
    Ok(())
}

/// Root mean square error between two equally long vectors.
pub fn rmse_between(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let sse: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sse / a.len() as f64).sqrt())
}

pub fn rmse(pred: &PredictiveDistribution, truth: &[f64]) -> Result<f64> {
    rmse_between(&pred.mean, truth)
}

/// Mean negative log probability of `truth` under independent Gaussian
/// marginals. Refuses to score when any variance is not positive.
pub fn mnlp(pred: &PredictiveDistribution, truth: &[f64]) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    let var = pred.variances();
    let bad: Vec<f64> = var.iter().copied().filter(|&v| !(v > 0.0)).collect();
    if !bad.is_empty() {
        return Err(GpError::NonpositiveVariance {
            count: bad.len(),
            min: bad.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    let total: f64 = pred
        .mean
        .iter()
        .zip(truth)
        .zip(&var)
        .map(|((m, y), v)| (y - m) * (y - m) / v + (2.0 * PI * v).ln())
        .sum();
    Ok(0.5 * total / truth.len() as f64)
}
