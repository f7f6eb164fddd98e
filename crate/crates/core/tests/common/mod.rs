//! Instances and brute-force reference implementations shared by the
//! integration tests. The references use explicit dense inverses and plain
//! loops so that they share no code path with the library beyond the
//! kernel itself.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pgpr::data::prior_means;
use pgpr::kernel::cov_matrix;
use pgpr::{BlockStructure, Dataset, Hyperparameters, InputPoint, SetId, SupportSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform inputs in `[0, 1]^d` and noisy outputs of a smooth function.
pub fn instance(seed: u64, n: usize, u: usize, d: usize) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = |k: usize| -> Vec<Vec<f64>> { (0..k).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect() };
    let xs = rows(n);
    let us = rows(u);
    let mut noise = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| {
            let s: f64 = x.iter().enumerate().map(|(i, v)| ((i + 2) as f64 * v).sin()).sum();
            s + 0.3 * x[0] * x[0] + 0.1 * (noise.random::<f64>() - 0.5)
        })
        .collect();
    (
        Dataset::from_rows(SetId::TRAIN, xs, Some(ys)).unwrap(),
        Dataset::from_rows(SetId::TEST, us, None).unwrap(),
    )
}

pub fn hyper(d: usize) -> Hyperparameters {
    Hyperparameters::isotropic(1.0, 0.05, 0.3, d).unwrap()
}

fn inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

fn residual(train: &Dataset, test: &Dataset) -> (DVector<f64>, DVector<f64>) {
    let (mu_d, mu_u) = prior_means(train, test).unwrap();
    let y = DVector::from_column_slice(train.outputs().unwrap());
    (y - mu_d, mu_u)
}

/// Exact posterior with an explicit inverse of `Σ_DD`.
pub fn dense_fgp(train: &Dataset, test: &Dataset, h: &Hyperparameters) -> (DVector<f64>, DMatrix<f64>) {
    let d = train.inputs();
    let u = test.inputs();
    let (r, mu_u) = residual(train, test);
    let k_inv = inv(&cov_matrix(d, d, h).unwrap());
    let k_ud = cov_matrix(u, d, h).unwrap();
    let mean = mu_u + &k_ud * &k_inv * r;
    let cov = cov_matrix(u, u, h).unwrap() - &k_ud * &k_inv * k_ud.transpose();
    (mean, cov)
}

/// `Γ_AB = Σ_AS Σ_SS⁻¹ Σ_SB`.
fn gamma(a: &[InputPoint], b: &[InputPoint], s: &[InputPoint], h: &Hyperparameters) -> DMatrix<f64> {
    cov_matrix(a, s, h).unwrap() * inv(&cov_matrix(s, s, h).unwrap()) * cov_matrix(s, b, h).unwrap()
}

/// Literal PITC (`pic = false`) or PIC (`pic = true`) predictive
/// distribution: `Γ_DD + Λ` is formed densely and inverted explicitly.
pub fn dense_sparse(
    train: &Dataset,
    test: &Dataset,
    support: &SupportSet,
    blocks: &BlockStructure,
    h: &Hyperparameters,
    pic: bool,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = train.inputs();
    let u = test.inputs();
    let s = support.points();
    let (r, mu_u) = residual(train, test);
    let n = d.len();
    let k_dd = cov_matrix(d, d, h).unwrap();
    let g_dd = gamma(d, d, s, h);
    let mut lambda = DMatrix::zeros(n, n);
    let mut block_of = vec![0; n];
    for (m, b) in blocks.train_blocks().iter().enumerate() {
        for &i in b {
            block_of[i] = m;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if block_of[i] == block_of[j] {
                lambda[(i, j)] = k_dd[(i, j)] - g_dd[(i, j)];
            }
        }
    }
    let mut g_ud = gamma(u, d, s, h);
    if pic {
        let k_ud = cov_matrix(u, d, h).unwrap();
        let test_blocks = blocks.test_blocks().unwrap();
        let mut test_block_of = vec![0; u.len()];
        for (m, b) in test_blocks.iter().enumerate() {
            for &i in b {
                test_block_of[i] = m;
            }
        }
        for i in 0..u.len() {
            for j in 0..n {
                if test_block_of[i] == block_of[j] {
                    g_ud[(i, j)] = k_ud[(i, j)];
                }
            }
        }
    }
    let a_inv = inv(&(g_dd + lambda));
    let mean = mu_u + &g_ud * &a_inv * r;
    let cov = cov_matrix(u, u, h).unwrap() - &g_ud * &a_inv * g_ud.transpose();
    (mean, cov)
}

/// ICF predictive distribution with an explicit inverse of `FᵀF + σ_n² I`.
pub fn dense_icf(train: &Dataset, test: &Dataset, f: &DMatrix<f64>, h: &Hyperparameters) -> (DVector<f64>, DMatrix<f64>) {
    let d = train.inputs();
    let u = test.inputs();
    let (r, mu_u) = residual(train, test);
    let n = d.len();
    let approx = f.transpose() * f + DMatrix::identity(n, n) * h.noise_variance();
    let a_inv = inv(&approx);
    let k_ud = cov_matrix(u, d, h).unwrap();
    let mean = mu_u + &k_ud * &a_inv * r;
    let cov = cov_matrix(u, u, h).unwrap() - &k_ud * &a_inv * k_ud.transpose();
    (mean, cov)
}

/// Noise-free target `Σ_DD − σ_n² I` formed densely.
pub fn icf_target(train: &Dataset, h: &Hyperparameters) -> DMatrix<f64> {
    let d = train.inputs();
    let n = d.len();
    cov_matrix(d, d, h).unwrap() - DMatrix::identity(n, n) * h.noise_variance()
}

/// Pivoted Cholesky by full Schur-complement downdates of the dense
/// target. Returns the pivots and the residual diagonal.
pub fn naive_pivoted_cholesky(target: &DMatrix<f64>, rank: usize) -> (Vec<usize>, Vec<f64>) {
    let mut res = target.clone();
    let n = res.nrows();
    let mut pivots = Vec::new();
    for _ in 0..rank {
        let mut p = usize::MAX;
        for i in 0..n {
            if pivots.contains(&i) {
                continue;
            }
            if p == usize::MAX || res[(i, i)] > res[(p, p)] {
                p = i;
            }
        }
        let piv = res[(p, p)];
        pivots.push(p);
        let col = res.column(p).into_owned();
        for i in 0..n {
            for j in 0..n {
                res[(i, j)] -= col[i] * col[j] / piv;
            }
        }
    }
    let diag = (0..n).map(|i| if pivots.contains(&i) { 0.0 } else { res[(i, i)] }).collect();
    (pivots, diag)
}

pub fn max_abs(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest entrywise difference relative to the largest entry of `b`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    max_abs(a.iter().copied(), b.iter().copied()) / scale
}
