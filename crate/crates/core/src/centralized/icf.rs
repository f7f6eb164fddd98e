//! Greedy pivoted incomplete Cholesky factorization of the noise-free
//! training covariance, and the predictor built on `F^T F + σ_n² I`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::{centered_outputs, prior_means, Dataset, InputPoint};
use crate::error::{GpError, Result};
use crate::kernel::{cov_matrix, cov_symmetric, signal_covariance, Hyperparameters};
use crate::linalg::{column_sq_norms, symmetrize, Factor};
use crate::predictive::{Covariance, PredictiveDistribution};

/// Pivots more negative than this mean the kernel matrix is not PSD.
pub const NEGATIVE_PIVOT_TOLERANCE: f64 = 1e-8;

const MAGIC: &[u8; 4] = b"PICF";
const FORMAT_VERSION: u32 = 1;

/// Rank-`R` factor `F` with `F^T F ≈ Σ_DD − σ_n² I`.
#[derive(Clone, Debug, PartialEq)]
pub struct IcfFactor {
    /// `R × |D|`, columns in training order.
    factor: DMatrix<f64>,
    /// Training indices; the first `R` are the pivots in the order chosen.
    pivot_order: Vec<usize>,
    /// Diagonal of `Σ_DD − σ_n² I − F^T F`.
    residual_diag: Vec<f64>,
}

impl IcfFactor {
    pub(crate) fn from_parts(factor: DMatrix<f64>, pivot_order: Vec<usize>, residual_diag: Vec<f64>) -> Result<Self> {
        let n = factor.ncols();
        if pivot_order.len() != n || residual_diag.len() != n || factor.nrows() > n {
            return Err(GpError::InvalidInput("inconsistent incomplete Cholesky factor".into()));
        }
        let mut seen = vec![false; n];
        for &p in &pivot_order {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(GpError::InvalidInput("pivot order is not a permutation".into()));
            }
        }
        Ok(IcfFactor {
            factor,
            pivot_order,
            residual_diag,
        })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn rank(&self) -> usize {
        self.factor.nrows()
    }

    pub fn len(&self) -> usize {
        self.factor.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.ncols() == 0
    }

    pub fn pivot_order(&self) -> &[usize] {
        &self.pivot_order
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivot_order[..self.rank()]
    }

    pub fn residual_diag(&self) -> &[f64] {
        &self.residual_diag
    }

    pub fn residual_trace(&self) -> f64 {
        self.residual_diag.iter().sum()
    }

    /// Columns of `F` belonging to the given training indices.
    pub fn column_block(&self, idx: &[usize]) -> DMatrix<f64> {
        self.factor.select_columns(idx)
    }

    /// Little-endian binary: magic, version, `|D|`, `R`, pivot order,
    /// row-major factor, residual diagonal.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.rank() as u64).to_le_bytes())?;
        for &p in &self.pivot_order {
            w.write_all(&(p as u64).to_le_bytes())?;
        }
        for row in self.factor.row_iter() {
            for v in row.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for v in &self.residual_diag {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| GpError::InvalidInput(format!("ICF file: {m}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != FORMAT_VERSION {
            return Err(bad("unsupported version"));
        }
        let mut b8 = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n = read_u64(&mut r)? as usize;
        let rank = read_u64(&mut r)? as usize;
        if rank > n {
            return Err(bad("rank exceeds size"));
        }
        let pivot_order = (0..n)
            .map(|_| read_u64(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let read_f64 = |r: &mut R| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let mut data = Vec::with_capacity(rank * n);
        for _ in 0..rank * n {
            data.push(read_f64(&mut r)?);
        }
        let factor = DMatrix::from_row_slice(rank, n, &data);
        let residual_diag = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        IcfFactor::from_parts(factor, pivot_order, residual_diag)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        IcfFactor::read_from(std::io::BufReader::new(f))
    }
}

/// Diagonal of the factorization target `Σ_DD − σ_n² I`.
pub(crate) fn target_diagonal(h: &Hyperparameters) -> f64 {
    h.signal_variance() + h.jitter()
}

/// Entry `F[k, j]` given the target entry, the first `k` rows of columns
/// `j` and `p`, and the pivot value `F[k, p]`. The distributed factorization
/// calls this same function so both produce identical bits.
#[inline]
pub(crate) fn factor_entry(target: f64, col_j: &[f64], col_p: &[f64], pivot: f64) -> f64 {
    let mut num = target;
    for (a, b) in col_j.iter().zip(col_p) {
        num -= a * b;
    }
    num / pivot
}

/// Square root of a pivot residual, or an error if it is too negative.
/// Residuals in `[-tol, 0]` yield a zero row.
pub(crate) fn pivot_value(residual: f64, step: usize) -> Result<f64> {
    if residual < -NEGATIVE_PIVOT_TOLERANCE || residual.is_nan() {
        return Err(GpError::NotPsd {
            pivot: step,
            residual,
        });
    }
    Ok(residual.max(0.0).sqrt())
}

/// Index of the largest residual among unpivoted points; ties go to the
/// lowest index.
pub(crate) fn argmax_residual(residual: &[f64], pivoted: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &r) in residual.iter().enumerate() {
        if pivoted[i] {
            continue;
        }
        match best {
            Some(b) if residual[b] >= r => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Greedy pivoted incomplete Cholesky of `Σ_DD − σ_n² I` with `rank` rows.
pub fn icf_factorize(train: &Dataset, h: &Hyperparameters, rank: usize) -> Result<IcfFactor> {
    let n = train.len();
    if rank == 0 || rank > n {
        return Err(GpError::InvalidInput(format!("rank {rank} must be in 1..={n}")));
    }
    h.check_dim(train.dim())?;
    let pts = train.inputs();
    let mut f = DMatrix::<f64>::zeros(rank, n);
    let mut residual = vec![target_diagonal(h); n];
    let mut pivoted = vec![false; n];
    let mut order = Vec::with_capacity(n);

    for k in 0..rank {
        let p = argmax_residual(&residual, &pivoted).expect("rank <= n");
        let pivot = pivot_value(residual[p], k)?;
        pivoted[p] = true;
        order.push(p);
        residual[p] = 0.0;
        f[(k, p)] = pivot;
        if pivot == 0.0 {
            continue;
        }
        let col_p: Vec<f64> = f.column(p).rows(0, k).iter().copied().collect();
        for j in 0..n {
            if pivoted[j] {
                continue;
            }
            let target = signal_covariance(&pts[j], &pts[p], h);
            let v = factor_entry(target, &f.column(j).as_slice()[..k], &col_p, pivot);
            f[(k, j)] = v;
            residual[j] -= v * v;
        }
    }
    order.extend((0..n).filter(|&i| !pivoted[i]));
    IcfFactor::from_parts(f, order, residual)
}

/// Predictive distribution with `Σ_DD` replaced by `F^T F + σ_n² I`, applied
/// through the `R × R` matrix `Φ = I + σ_n⁻² F F^T`.
pub fn icf_predict(
    train: &Dataset,
    test: &Dataset,
    icf: &IcfFactor,
    h: &Hyperparameters,
    want_full_cov: bool,
) -> Result<PredictiveDistribution> {
    if test.is_empty() {
        return Err(GpError::InvalidInput("test set is empty".into()));
    }
    if icf.len() != train.len() {
        return Err(GpError::DimensionMismatch {
            expected: train.len(),
            found: icf.len(),
        });
    }
    let (mu_d, mu_u) = prior_means(train, test)?;
    let r = centered_outputs(train, &mu_d)?;
    let f = icf.factor();
    let inv_noise = 1.0 / h.noise_variance();

    let mut phi = f * f.transpose() * inv_noise;
    for i in 0..phi.nrows() {
        phi[(i, i)] += 1.0;
    }
    symmetrize(&mut phi);
    let phi = Factor::new(phi, "Phi = I + F F^T / noise")?;

    // (F^T F + σ² I)⁻¹ r = σ⁻² r − σ⁻⁴ F^T Φ⁻¹ F r
    let fr: DVector<f64> = f * &r;
    let v = &r * inv_noise - f.tr_mul(&phi.solve_vec(&fr)) * (inv_noise * inv_noise);
    let k_du = cov_matrix(train.inputs(), test.inputs(), h)?;
    let mean = mu_u + k_du.tr_mul(&v);

    let fk = f * &k_du;
    let half = phi.half_solve(&fk);
    let covariance = if want_full_cov {
        let mut c = cov_symmetric(test.inputs(), h)? - k_du.tr_mul(&k_du) * inv_noise
            + half.tr_mul(&half) * (inv_noise * inv_noise);
        symmetrize(&mut c);
        Covariance::Full(c)
    } else {
        let kk = column_sq_norms(&k_du);
        let hh = column_sq_norms(&half);
        Covariance::Variances(
            kk.iter()
                .zip(&hh)
                .map(|(a, b)| h.prior_variance() - a * inv_noise + b * inv_noise * inv_noise)
                .collect(),
        )
    };
    Ok(PredictiveDistribution::new(
        mean.iter().copied().collect(),
        covariance,
        test.ids(),
    ))
}

/// Points of `train` in pivot order, handy for inspecting the factor.
pub fn pivot_points<'a>(train: &'a Dataset, icf: &IcfFactor) -> Vec<&'a InputPoint> {
    icf.pivots().iter().map(|&i| &train.inputs()[i]).collect()
}
