//! Model-based imputation: fit a per-feature (or regression) model to the
//! available values and fill each masked cell with its prediction.

use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeModel {
    Mean,
    Median,
    /// Mean after removing the m smallest and m largest available values.
    TrimmedMean(usize),
    /// Least-squares prediction of the missing feature from all other
    /// features, fitted on complete cases only (no intercept).
    LinearRegression,
}

fn available(data: &DatasetMatrix, j: usize) -> Vec<f64> {
    (0..data.n())
        .filter(|&i| !data.is_missing(i, j))
        .map(|i| data.row(i)[j])
        .collect()
}

pub(crate) fn median_of(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

fn feature_fill(data: &DatasetMatrix, j: usize, model: ImputeModel) -> Result<f64> {
    let mut vals = available(data, j);
    if vals.is_empty() {
        return Err(Error::Imputation(format!(
            "feature {j} is entirely missing"
        )));
    }
    match model {
        ImputeModel::Mean => Ok(vals.iter().sum::<f64>() / vals.len() as f64),
        ImputeModel::Median => {
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Ok(median_of(&vals))
        }
        ImputeModel::TrimmedMean(m) => {
            if vals.len() <= 2 * m {
                return Err(Error::Imputation(format!(
                    "feature {j}: trimming {m} from each side leaves nothing of {} values",
                    vals.len()
                )));
            }
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let kept = &vals[m..vals.len() - m];
            Ok(kept.iter().sum::<f64>() / kept.len() as f64)
        }
        ImputeModel::LinearRegression => unreachable!("handled separately"),
    }
}

/// Regression fill for cell (i, j): regress feature j on all other features
/// over the complete cases, then predict from row i's other features.
fn regression_fill(data: &DatasetMatrix, i: usize, j: usize) -> Result<f64> {
    let d = data.d();
    let complete: Vec<usize> = (0..data.n())
        .filter(|&r| (0..d).all(|c| !data.is_missing(r, c)))
        .collect();
    if complete.is_empty() {
        return Err(Error::Imputation("no complete cases for regression".into()));
    }
    let others: Vec<usize> = (0..d).filter(|&c| c != j).collect();
    if others.is_empty() {
        return Err(Error::Imputation(
            "regression needs at least two features".into(),
        ));
    }
    if (0..d).any(|c| c != j && data.is_missing(i, c)) {
        return Err(Error::Imputation(format!(
            "row {i}: regression imputation of feature {j} needs the other features present"
        )));
    }
    let x = DMatrix::from_fn(complete.len(), others.len(), |r, c| {
        data.row(complete[r])[others[c]]
    });
    let y = DVector::from_fn(complete.len(), |r, _| data.row(complete[r])[j]);
    let gram = x.transpose() * &x;
    let rhs = x.transpose() * y;
    let coef = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular regression system".into()))?;
    let xi = DVector::from_fn(others.len(), |c, _| data.row(i)[others[c]]);
    Ok(xi.dot(&coef))
}

/// Fill every masked cell per the model; the output has no missing entries.
#[allow(clippy::needless_range_loop)]
pub fn apply_impute(data: &DatasetMatrix, model: ImputeModel) -> Result<DatasetMatrix> {
    let mut rows: Vec<DVector<f64>> = data.rows().to_vec();
    match model {
        ImputeModel::LinearRegression => {
            for i in 0..data.n() {
                for j in 0..data.d() {
                    if data.is_missing(i, j) {
                        rows[i][j] = regression_fill(data, i, j)?;
                    }
                }
            }
        }
        _ => {
            // one fitted value per feature
            let mut fills: Vec<Option<f64>> = vec![None; data.d()];
            for i in 0..data.n() {
                for j in 0..data.d() {
                    if data.is_missing(i, j) {
                        if fills[j].is_none() {
                            fills[j] = Some(feature_fill(data, j, model)?);
                        }
                        rows[i][j] = fills[j].unwrap();
                    }
                }
            }
        }
    }
    Ok(DatasetMatrix::from_transformed(
        rows,
        vec![vec![false; data.d()]; data.n()],
        data.labels().map(|l| l.to_vec()),
    ))
}
