//! Squared-exponential covariance with per-dimension length-scales.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{format_float, InputPoint};
use crate::error::{GpError, Result};
use crate::keyvalue::KeyValues;

/// Added to every noise diagonal before factorization.
pub const DEFAULT_JITTER: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparameters {
    signal_variance: f64,
    noise_variance: f64,
    length_scales: Vec<f64>,
    jitter: f64,
}

impl Hyperparameters {
    pub fn new(signal_variance: f64, noise_variance: f64, length_scales: Vec<f64>) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(signal_variance) {
            return Err(GpError::InvalidHyperparameters(format!(
                "signal_variance must be positive, got {signal_variance}"
            )));
        }
        if !positive(noise_variance) {
            return Err(GpError::InvalidHyperparameters(format!(
                "noise_variance must be positive, got {noise_variance}"
            )));
        }
        if length_scales.is_empty() {
            return Err(GpError::InvalidHyperparameters(
                "length_scales must not be empty".into(),
            ));
        }
        if let Some(bad) = length_scales.iter().find(|&&l| !positive(l)) {
            return Err(GpError::InvalidHyperparameters(format!(
                "length scales must be positive, got {bad}"
            )));
        }
        Ok(Hyperparameters {
            signal_variance,
            noise_variance,
            length_scales,
            jitter: DEFAULT_JITTER,
        })
    }

    /// Same length-scale on every one of `dim` axes.
    pub fn isotropic(signal_variance: f64, noise_variance: f64, length_scale: f64, dim: usize) -> Result<Self> {
        Hyperparameters::new(signal_variance, noise_variance, vec![length_scale; dim])
    }

    pub fn with_jitter(mut self, jitter: f64) -> Result<Self> {
        if !(jitter.is_finite() && jitter >= 0.0) {
            return Err(GpError::InvalidHyperparameters(format!(
                "jitter must be nonnegative, got {jitter}"
            )));
        }
        self.jitter = jitter;
        Ok(self)
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// Prior variance of any point as it appears on a covariance diagonal.
    pub fn prior_variance(&self) -> f64 {
        self.signal_variance + self.noise_variance + self.jitter
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.dim(),
                found: d,
            });
        }
        Ok(())
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        Hyperparameters::from_key_values(&kv)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let h = Hyperparameters::new(
            kv.require("signal_variance")?,
            kv.require("noise_variance")?,
            kv.get_list("length_scales")?.ok_or_else(|| GpError::Config {
                line: 0,
                message: "missing key \"length_scales\"".into(),
            })?,
        )?;
        match kv.get::<f64>("jitter")? {
            Some(j) => h.with_jitter(j),
            None => Ok(h),
        }
    }

    pub fn read_config(path: impl AsRef<Path>) -> Result<Self> {
        Hyperparameters::from_config_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "signal_variance = {}", format_float(self.signal_variance));
        let _ = writeln!(s, "noise_variance = {}", format_float(self.noise_variance));
        let ls: Vec<String> = self.length_scales.iter().map(|&l| format_float(l)).collect();
        let _ = writeln!(s, "length_scales = {}", ls.join(", "));
        if self.jitter != DEFAULT_JITTER {
            let _ = writeln!(s, "jitter = {}", format_float(self.jitter));
        }
        s
    }
}

fn signal_part(x: &[f64], x2: &[f64], h: &Hyperparameters) -> f64 {
    let mut acc = 0.0;
    for ((a, b), l) in x.iter().zip(x2).zip(&h.length_scales) {
        let t = (a - b) / l;
        acc += t * t;
    }
    h.signal_variance * (-0.5 * acc).exp()
}

/// Covariance between two points. The noise term applies only when both
/// arguments are the same point (same id).
pub fn covariance(x: &InputPoint, x2: &InputPoint, h: &Hyperparameters) -> Result<f64> {
    h.check_dim(x.dim())?;
    h.check_dim(x2.dim())?;
    let k = signal_part(&x.features, &x2.features, h);
    Ok(if x.id == x2.id {
        k + h.noise_variance
    } else {
        k
    })
}

/// Noise-free part of the covariance.
pub fn signal_covariance(x: &InputPoint, x2: &InputPoint, h: &Hyperparameters) -> f64 {
    signal_part(&x.features, &x2.features, h)
}

fn scaled(points: &[InputPoint], h: &Hyperparameters) -> Result<Vec<f64>> {
    let d = h.dim();
    let mut out = Vec::with_capacity(points.len() * d);
    for p in points {
        h.check_dim(p.dim())?;
        out.extend(p.features.iter().zip(&h.length_scales).map(|(v, l)| v / l));
    }
    Ok(out)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Covariance matrix between two point lists. Entries pairing a point with
/// itself receive the noise variance plus jitter.
pub fn cov_matrix(a: &[InputPoint], b: &[InputPoint], h: &Hyperparameters) -> Result<DMatrix<f64>> {
    if std::ptr::eq(a, b) {
        return cov_symmetric(a, h);
    }
    let d = h.dim();
    let sa = scaled(a, h)?;
    let sb = scaled(b, h)?;
    let noise = h.noise_variance + h.jitter;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        let k = h.signal_variance * (-0.5 * sq_dist(&sa[i * d..(i + 1) * d], &sb[j * d..(j + 1) * d])).exp();
        if a[i].id == b[j].id {
            k + noise
        } else {
            k
        }
    }))
}

/// `cov_matrix(a, a)`, filled symmetrically.
pub fn cov_symmetric(a: &[InputPoint], h: &Hyperparameters) -> Result<DMatrix<f64>> {
    let d = h.dim();
    let sa = scaled(a, h)?;
    let n = a.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = h.prior_variance();
        let xj = &sa[j * d..(j + 1) * d];
        for i in (j + 1)..n {
            let k = h.signal_variance * (-0.5 * sq_dist(&sa[i * d..(i + 1) * d], xj)).exp();
            m[(i, j)] = k;
            m[(j, i)] = k;
        }
    }
    Ok(m)
}

/// Prior variances `Σ_xx` of each point, diagonal of [`cov_symmetric`].
pub fn prior_variances(a: &[InputPoint], h: &Hyperparameters) -> Result<Vec<f64>> {
    for p in a {
        h.check_dim(p.dim())?;
    }
    Ok(vec![h.prior_variance(); a.len()])
}
