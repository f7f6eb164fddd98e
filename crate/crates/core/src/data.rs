//! Input points, datasets and the prior mean attached to them.
//!
//! Every point carries a [`PointId`] made of the set it belongs to and its
//! index in that set. The kernel's noise term fires only between a point and
//! itself, so training, test and support points never share noise even when
//! their feature vectors coincide.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{GpError, Result};

/// Identifies the collection a point was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetId(pub u32);

impl SetId {
    pub const TRAIN: SetId = SetId(0);
    pub const TEST: SetId = SetId(1);
    pub const SUPPORT: SetId = SetId(2);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointId {
    pub set: SetId,
    pub index: usize,
}

impl PointId {
    pub fn new(set: SetId, index: usize) -> Self {
        PointId { set, index }
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.set.0, self.index)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputPoint {
    pub id: PointId,
    pub features: Vec<f64>,
}

impl InputPoint {
    pub fn new(id: PointId, features: Vec<f64>) -> Self {
        InputPoint { id, features }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn sq_distance(&self, other: &InputPoint) -> f64 {
        self.features
            .iter()
            .zip(&other.features)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Builds points with consecutive indices in `set`.
pub fn points_from_rows(set: SetId, rows: Vec<Vec<f64>>) -> Vec<InputPoint> {
    rows.into_iter()
        .enumerate()
        .map(|(i, f)| InputPoint::new(PointId::new(set, i), f))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum PriorMean {
    Constant(f64),
    PerPoint(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Vec<InputPoint>,
    outputs: Option<Vec<f64>>,
    prior_mean: Option<PriorMean>,
}

impl Dataset {
    pub fn new(inputs: Vec<InputPoint>, outputs: Option<Vec<f64>>) -> Result<Self> {
        if let Some(first) = inputs.first() {
            let d = first.dim();
            if let Some(bad) = inputs.iter().find(|p| p.dim() != d) {
                return Err(GpError::DimensionMismatch {
                    expected: d,
                    found: bad.dim(),
                });
            }
        }
        if let Some(y) = &outputs {
            if y.len() != inputs.len() {
                return Err(GpError::DimensionMismatch {
                    expected: inputs.len(),
                    found: y.len(),
                });
            }
        }
        let mut seen = HashSet::with_capacity(inputs.len());
        for p in &inputs {
            if !seen.insert(p.id) {
                return Err(GpError::InvalidInput(format!("duplicate point id {}", p.id)));
            }
        }
        Ok(Dataset {
            inputs,
            outputs,
            prior_mean: None,
        })
    }

    pub fn from_rows(set: SetId, rows: Vec<Vec<f64>>, outputs: Option<Vec<f64>>) -> Result<Self> {
        Dataset::new(points_from_rows(set, rows), outputs)
    }

    pub fn with_prior_mean(mut self, prior: PriorMean) -> Result<Self> {
        if let PriorMean::PerPoint(v) = &prior {
            if v.len() != self.len() {
                return Err(GpError::DimensionMismatch {
                    expected: self.len(),
                    found: v.len(),
                });
            }
        }
        self.prior_mean = Some(prior);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Feature dimension, or 0 for an empty dataset.
    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, InputPoint::dim)
    }

    pub fn inputs(&self) -> &[InputPoint] {
        &self.inputs
    }

    pub fn outputs(&self) -> Option<&[f64]> {
        self.outputs.as_deref()
    }

    pub fn prior_mean(&self) -> Option<&PriorMean> {
        self.prior_mean.as_ref()
    }

    pub fn ids(&self) -> Vec<PointId> {
        self.inputs.iter().map(|p| p.id).collect()
    }

    pub(crate) fn require_outputs(&self, what: &str) -> Result<&[f64]> {
        self.outputs
            .as_deref()
            .ok_or_else(|| GpError::InvalidInput(format!("{what} has no outputs")))
    }

    /// Rows `idx` in the given order; outputs and per-point priors follow.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let inputs = idx.iter().map(|&i| self.inputs[i].clone()).collect();
        let outputs = self
            .outputs
            .as_ref()
            .map(|y| idx.iter().map(|&i| y[i]).collect());
        let prior_mean = self.prior_mean.as_ref().map(|p| match p {
            PriorMean::Constant(c) => PriorMean::Constant(*c),
            PriorMean::PerPoint(v) => PriorMean::PerPoint(idx.iter().map(|&i| v[i]).collect()),
        });
        Dataset {
            inputs,
            outputs,
            prior_mean,
        }
    }

    /// Drops the outputs, e.g. to hand test inputs to a predictor.
    pub fn without_outputs(&self) -> Dataset {
        Dataset {
            inputs: self.inputs.clone(),
            outputs: None,
            prior_mean: self.prior_mean.clone(),
        }
    }

    /// Concatenation of datasets that share a dimension. Prior means must be
    /// either all absent or all present.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let inputs: Vec<InputPoint> = parts.iter().flat_map(|d| d.inputs.iter().cloned()).collect();
        let outputs = if parts.iter().all(|d| d.outputs.is_some()) {
            Some(parts.iter().flat_map(|d| d.outputs.clone().unwrap()).collect())
        } else {
            None
        };
        let priors: Vec<_> = parts.iter().map(|d| d.prior_mean.as_ref()).collect();
        let prior = if priors.iter().all(Option::is_none) {
            None
        } else if priors.iter().all(Option::is_some) {
            let consts: Vec<f64> = priors
                .iter()
                .filter_map(|p| match p {
                    Some(PriorMean::Constant(c)) => Some(*c),
                    _ => None,
                })
                .collect();
            if consts.len() == parts.len() && consts.windows(2).all(|w| w[0] == w[1]) {
                Some(PriorMean::Constant(consts[0]))
            } else {
                let mut v = Vec::with_capacity(inputs.len());
                for d in parts {
                    v.extend(d.prior_vector_own().unwrap().iter());
                }
                Some(PriorMean::PerPoint(v))
            }
        } else {
            return Err(GpError::InvalidInput(
                "cannot concatenate datasets with and without prior means".into(),
            ));
        };
        let mut out = Dataset::new(inputs, outputs)?;
        out.prior_mean = prior;
        Ok(out)
    }

    fn prior_vector_own(&self) -> Option<DVector<f64>> {
        self.prior_mean.as_ref().map(|p| match p {
            PriorMean::Constant(c) => DVector::from_element(self.len(), *c),
            PriorMean::PerPoint(v) => DVector::from_column_slice(v),
        })
    }

    /// The constant prior used when none is set: the mean of the outputs.
    fn default_constant(&self) -> Option<f64> {
        self.outputs
            .as_ref()
            .filter(|y| !y.is_empty())
            .map(|y| y.iter().sum::<f64>() / y.len() as f64)
    }

    pub fn read_csv(path: impl AsRef<Path>, set: SetId) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(file, set).map_err(|e| match e {
            GpError::InvalidInput(message) => GpError::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Reads a header row `f1..fd[,y]` followed by numeric rows.
    pub fn from_csv_reader<R: Read>(reader: R, set: SetId) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let has_y = headers.iter().last() == Some("y");
        let d = if has_y { headers.len() - 1 } else { headers.len() };
        for (i, h) in headers.iter().take(d).enumerate() {
            if h != format!("f{}", i + 1) {
                return Err(GpError::InvalidInput(format!(
                    "expected header f{} but found {h:?}",
                    i + 1
                )));
            }
        }
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| GpError::InvalidInput(format!("row {}: {e}", line + 2)))?;
            if vals.len() != headers.len() {
                return Err(GpError::InvalidInput(format!(
                    "row {} has {} fields, expected {}",
                    line + 2,
                    vals.len(),
                    headers.len()
                )));
            }
            if has_y {
                ys.push(vals[d]);
            }
            rows.push(vals[..d].to_vec());
        }
        Dataset::from_rows(set, rows, has_y.then_some(ys))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(file))
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        write_points_csv(writer, &self.inputs, self.outputs.as_deref())
    }
}

pub(crate) fn write_points_csv<W: Write>(
    writer: W,
    points: &[InputPoint],
    outputs: Option<&[f64]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = points.first().map_or(0, InputPoint::dim);
    let mut header: Vec<String> = (1..=d).map(|i| format!("f{i}")).collect();
    if outputs.is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for (i, p) in points.iter().enumerate() {
        let mut row: Vec<String> = p.features.iter().map(|&v| format_float(v)).collect();
        if let Some(y) = outputs {
            row.push(format_float(y[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Prior mean vectors for a training and a test set.
///
/// A set with an explicit prior uses it. A training set without one falls
/// back to the mean of its outputs; a test set without one inherits the
/// training set's constant.
pub fn prior_means(train: &Dataset, test: &Dataset) -> Result<(DVector<f64>, DVector<f64>)> {
    let train_const = match train.prior_mean() {
        Some(PriorMean::Constant(c)) => Some(*c),
        Some(PriorMean::PerPoint(_)) => None,
        None => train.default_constant(),
    };
    let mu_d = match train.prior_vector_own() {
        Some(v) => v,
        None => DVector::from_element(
            train.len(),
            train_const.ok_or_else(|| {
                GpError::InvalidInput("training set has neither prior mean nor outputs".into())
            })?,
        ),
    };
    let mu_u = match test.prior_vector_own() {
        Some(v) => v,
        None => DVector::from_element(
            test.len(),
            train_const.ok_or_else(|| {
                GpError::InvalidInput(
                    "test set needs an explicit prior mean when training priors are per point"
                        .into(),
                )
            })?,
        ),
    };
    Ok((mu_d, mu_u))
}

/// Copies of `train` and `test` whose prior means are pinned to the values
/// [`prior_means`] resolves for the pair, so that subsets keep them.
pub(crate) fn with_resolved_priors(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    let (mu_d, mu_u) = prior_means(train, test)?;
    let pin = |ds: &Dataset, mu: DVector<f64>| -> Dataset {
        let mut out = ds.clone();
        out.prior_mean = Some(PriorMean::PerPoint(mu.iter().copied().collect()));
        out
    };
    Ok((pin(train, mu_d), pin(test, mu_u)))
}

/// `y_D - mu_D` for a dataset with outputs.
pub(crate) fn centered_outputs(train: &Dataset, mu: &DVector<f64>) -> Result<DVector<f64>> {
    let y = train.require_outputs("training set")?;
    Ok(DVector::from_iterator(
        y.len(),
        y.iter().zip(mu.iter()).map(|(a, b)| a - b),
    ))
}
