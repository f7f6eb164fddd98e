//! Centralized PITC and PIC predictors.
//!
//! Both share the training-side covariance `Γ_DD + Λ`, where
//! `Γ_BB' = Σ_BS Σ_SS⁻¹ Σ_SB'` and `Λ` keeps the diagonal blocks of
//! `Σ_DD|S`. Its inverse is applied through the matrix inversion lemma, so
//! only the `|D_m|`-sized blocks of `Λ` and the `|S|`-sized matrix
//! `Σ_SS + Σ_SD Λ⁻¹ Σ_DS` are ever factorized.

use nalgebra::{DMatrix, DVector};

use super::blocks::BlockStructure;
use crate::data::{centered_outputs, prior_means, Dataset, InputPoint};
use crate::error::{GpError, Result};
use crate::kernel::{cov_matrix, cov_symmetric, Hyperparameters};
use crate::linalg::{diag_of_tr_mul, symmetrize, Factor};
use crate::predictive::{Covariance, PredictiveDistribution};
use crate::support::SupportSet;

struct TrainBlock {
    /// Training indices, in block order.
    idx: Vec<usize>,
    /// `Σ_S D_m`.
    k_sd: DMatrix<f64>,
    lambda: Factor,
}

/// Factorized `Γ_DD + Λ` over a block structure.
struct LowRankPlusBlocks {
    blocks: Vec<TrainBlock>,
    /// `Σ_SS + Σ_SD Λ⁻¹ Σ_DS`.
    reduced: Factor,
}

impl LowRankPlusBlocks {
    fn new(
        train: &[InputPoint],
        s: &[InputPoint],
        s_fac: &Factor,
        k_ss: &DMatrix<f64>,
        structure: &BlockStructure,
        h: &Hyperparameters,
    ) -> Result<Self> {
        let mut blocks = Vec::with_capacity(structure.num_blocks());
        let mut reduced = k_ss.clone();
        for (m, idx) in structure.train_blocks().iter().enumerate() {
            if idx.is_empty() {
                return Err(GpError::InvalidInput(format!("training block {m} is empty")));
            }
            let pts: Vec<InputPoint> = idx.iter().map(|&i| train[i].clone()).collect();
            let k_sd = cov_matrix(s, &pts, h)?;
            let a = s_fac.half_solve(&k_sd);
            let mut lam = cov_symmetric(&pts, h)? - a.tr_mul(&a);
            symmetrize(&mut lam);
            let lambda = Factor::new(lam, &format!("Lambda block {m}"))?;
            let b = lambda.half_solve(&k_sd.transpose());
            reduced += b.tr_mul(&b);
            blocks.push(TrainBlock {
                idx: idx.clone(),
                k_sd,
                lambda,
            });
        }
        symmetrize(&mut reduced);
        let reduced = Factor::new(reduced, "Sigma_SS + Sigma_SD Lambda^-1 Sigma_DS")?;
        Ok(LowRankPlusBlocks { blocks, reduced })
    }

    /// Splits rows of `x` (indexed by original training index) into blocks.
    fn gather(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| x.select_rows(&b.idx)).collect()
    }

    /// `(Γ_DD + Λ)⁻¹ X` for `X` given per block; result per block.
    fn apply_inverse(&self, x: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let y: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .zip(x)
            .map(|(b, xm)| b.lambda.solve(xm))
            .collect();
        let mut z = DMatrix::zeros(self.reduced.dim(), x[0].ncols());
        for (b, ym) in self.blocks.iter().zip(&y) {
            z += &b.k_sd * ym;
        }
        let w = self.reduced.solve(&z);
        self.blocks
            .iter()
            .zip(y)
            .map(|(b, ym)| ym - b.lambda.solve(&b.k_sd.tr_mul(&w)))
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Variant {
    Pitc,
    Pic,
}

/// PITC predictive distribution of `test`.
pub fn pitc_predict(
    train: &Dataset,
    test: &Dataset,
    support: &SupportSet,
    blocks: &BlockStructure,
    h: &Hyperparameters,
    want_full_cov: bool,
) -> Result<PredictiveDistribution> {
    predict(train, test, support, blocks, h, want_full_cov, Variant::Pitc)
}

/// PIC predictive distribution of `test`; `blocks` must pair every training
/// block with a block of test indices.
pub fn pic_predict(
    train: &Dataset,
    test: &Dataset,
    support: &SupportSet,
    blocks: &BlockStructure,
    h: &Hyperparameters,
    want_full_cov: bool,
) -> Result<PredictiveDistribution> {
    predict(train, test, support, blocks, h, want_full_cov, Variant::Pic)
}

fn predict(
    train: &Dataset,
    test: &Dataset,
    support: &SupportSet,
    structure: &BlockStructure,
    h: &Hyperparameters,
    want_full_cov: bool,
    variant: Variant,
) -> Result<PredictiveDistribution> {
    if test.is_empty() {
        return Err(GpError::InvalidInput("test set is empty".into()));
    }
    let n: usize = structure.train_blocks().iter().map(Vec::len).sum();
    if n != train.len() {
        return Err(GpError::InvalidInput(format!(
            "blocks cover {n} points but the training set has {}",
            train.len()
        )));
    }
    if variant == Variant::Pic {
        let tb = structure.test_blocks().ok_or_else(|| {
            GpError::InvalidInput("PIC needs test blocks aligned with training blocks".into())
        })?;
        let u: usize = tb.iter().map(Vec::len).sum();
        if u != test.len() {
            return Err(GpError::InvalidInput(format!(
                "test blocks cover {u} points but the test set has {}",
                test.len()
            )));
        }
    }

    let (mu_d, mu_u) = prior_means(train, test)?;
    let r = centered_outputs(train, &mu_d)?;
    let s = support.points();
    let k_ss = cov_symmetric(s, h)?;
    let s_fac = Factor::new(k_ss.clone(), "Sigma_SS")?;
    let model = LowRankPlusBlocks::new(train.inputs(), s, &s_fac, &k_ss, structure, h)?;

    // Γ_DU (PITC) or Γ̃_DU (PIC), per training block.
    let k_su = cov_matrix(s, test.inputs(), h)?;
    let q = s_fac.solve(&k_su);
    let mut g: Vec<DMatrix<f64>> = model.blocks.iter().map(|b| b.k_sd.tr_mul(&q)).collect();
    if variant == Variant::Pic {
        let test_blocks = structure.test_blocks().expect("checked above");
        for (m, (b, ub)) in model.blocks.iter().zip(test_blocks).enumerate() {
            if ub.is_empty() {
                continue;
            }
            let dm: Vec<InputPoint> = b.idx.iter().map(|&i| train.inputs()[i].clone()).collect();
            let um: Vec<InputPoint> = ub.iter().map(|&i| test.inputs()[i].clone()).collect();
            let local = cov_matrix(&dm, &um, h)?;
            for (c, &ui) in ub.iter().enumerate() {
                g[m].set_column(ui, &local.column(c));
            }
        }
    }

    let r_blocks = model.gather(&DMatrix::from_column_slice(r.len(), 1, r.as_slice()));
    let v = model.apply_inverse(&r_blocks);
    let mut mean: DVector<f64> = mu_u;
    for (gm, vm) in g.iter().zip(&v) {
        mean += gm.tr_mul(vm).column(0);
    }

    let w = model.apply_inverse(&g);
    let covariance = if want_full_cov {
        let mut c = cov_symmetric(test.inputs(), h)?;
        for (gm, wm) in g.iter().zip(&w) {
            c -= gm.tr_mul(wm);
        }
        symmetrize(&mut c);
        Covariance::Full(c)
    } else {
        let mut var = vec![h.prior_variance(); test.len()];
        for (gm, wm) in g.iter().zip(&w) {
            for (v, d) in var.iter_mut().zip(diag_of_tr_mul(gm, wm)) {
                *v -= d;
            }
        }
        Covariance::Variances(var)
    };
    Ok(PredictiveDistribution::new(
        mean.iter().copied().collect(),
        covariance,
        test.ids(),
    ))
}
