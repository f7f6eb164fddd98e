//! Greedy selection of the support set by largest posterior variance.

use std::path::Path;

use crate::data::{write_points_csv, Dataset, InputPoint, PointId, SetId};
use crate::error::{GpError, Result};
use crate::kernel::{covariance, Hyperparameters};

/// The inputs shared by all workers as the basis of the low-rank summaries.
///
/// Support points are their own random variables: they are re-identified
/// under [`SetId::SUPPORT`] so they never share a noise term with training
/// or test points, even when selected from the training inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportSet {
    points: Vec<InputPoint>,
    origin: Vec<PointId>,
    selected_variances: Vec<f64>,
}

impl SupportSet {
    pub fn from_points(points: Vec<InputPoint>) -> Result<SupportSet> {
        if points.is_empty() {
            return Err(GpError::InvalidInput("support set must not be empty".into()));
        }
        let origin = points.iter().map(|p| p.id).collect();
        let points: Vec<InputPoint> = points
            .into_iter()
            .enumerate()
            .map(|(i, p)| InputPoint::new(PointId::new(SetId::SUPPORT, i), p.features))
            .collect();
        // Reuses the dimension check.
        Dataset::new(points.clone(), None)?;
        Ok(SupportSet {
            points,
            origin,
            selected_variances: Vec::new(),
        })
    }

    pub fn points(&self) -> &[InputPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ids of the candidates the points were taken from, in selection order.
    pub fn origin(&self) -> &[PointId] {
        &self.origin
    }

    /// Posterior variance of each point at the moment it was selected.
    /// Empty when the set was not produced by [`select_support`].
    pub fn selected_variances(&self) -> &[f64] {
        &self.selected_variances
    }

    /// The support set is meant to be much smaller than the data.
    pub fn is_oversized(&self, n_train: usize) -> bool {
        2 * self.len() > n_train
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        write_points_csv(std::io::BufWriter::new(file), &self.points, None)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<SupportSet> {
        let ds = Dataset::read_csv(path, SetId::SUPPORT)?;
        SupportSet::from_points(ds.inputs().to_vec())
    }
}

/// Greedily picks `target_size` candidates, each time the one with the
/// largest posterior variance given those already picked. Ties go to the
/// lowest id.
///
/// The posterior variances are maintained with a Cholesky factor of `Σ_SS`
/// grown by one row per pick, `O(|candidates|·|S|²)` overall.
pub fn select_support(
    candidates: &[InputPoint],
    target_size: usize,
    h: &Hyperparameters,
) -> Result<SupportSet> {
    if candidates.is_empty() {
        return Err(GpError::InvalidInput("no support candidates".into()));
    }
    if target_size == 0 || target_size > candidates.len() {
        return Err(GpError::InvalidInput(format!(
            "support size {target_size} must be in 1..={}",
            candidates.len()
        )));
    }
    for c in candidates {
        h.check_dim(c.dim())?;
    }
    let n = candidates.len();
    let mut var = vec![h.prior_variance(); n];
    let mut picked = vec![false; n];
    // rows[k][i] = (L⁻¹ Σ_S,i)_k for the first k picks.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(target_size);
    let mut order = Vec::with_capacity(target_size);
    let mut selected_variances = Vec::with_capacity(target_size);

    for _ in 0..target_size {
        let p = (0..n)
            .filter(|&i| !picked[i])
            .reduce(|best, i| {
                if var[i] > var[best] || (var[i] == var[best] && candidates[i].id < candidates[best].id) {
                    i
                } else {
                    best
                }
            })
            .expect("target_size <= candidates");
        if !(var[p] > 0.0) {
            return Err(GpError::conditioning("Sigma_SS during support selection"));
        }
        picked[p] = true;
        order.push(p);
        selected_variances.push(var[p]);

        let pivot = var[p].sqrt();
        let mut row = vec![0.0; n];
        row[p] = pivot;
        for i in 0..n {
            if picked[i] {
                continue;
            }
            let mut num = covariance(&candidates[i], &candidates[p], h)?;
            for r in &rows {
                num -= r[i] * r[p];
            }
            let l = num / pivot;
            row[i] = l;
            var[i] -= l * l;
        }
        rows.push(row);
    }

    let mut set = SupportSet::from_points(order.iter().map(|&i| candidates[i].clone()).collect())?;
    set.selected_variances = selected_variances;
    Ok(set)
}
