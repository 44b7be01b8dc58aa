//! Per-feature affine scaling.

use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleKind {
    /// (x - mean) / std per feature.
    Standard,
    /// (x - min) / (max - min) per feature.
    MinMax,
}

/// Per-feature mean and population standard deviation over available cells.
pub fn feature_stats(data: &DatasetMatrix) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(data.d());
    for j in 0..data.d() {
        let vals: Vec<f64> = (0..data.n())
            .filter(|&i| !data.is_missing(i, j))
            .map(|i| data.row(i)[j])
            .collect();
        if vals.is_empty() {
            return Err(Error::Scaling(format!("feature {j} entirely missing")));
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        out.push((mean, var.sqrt()));
    }
    Ok(out)
}

/// Scale each feature; masked cells are passed through untouched.
pub fn apply_scale(data: &DatasetMatrix, kind: ScaleKind) -> Result<DatasetMatrix> {
    let d = data.d();
    let transforms: Vec<(f64, f64)> = match kind {
        ScaleKind::Standard => feature_stats(data)?
            .into_iter()
            .enumerate()
            .map(|(j, (mean, std))| {
                if std <= 0.0 {
                    Err(Error::Scaling(format!(
                        "feature {j} has zero standard deviation"
                    )))
                } else {
                    Ok((mean, std))
                }
            })
            .collect::<Result<_>>()?,
        ScaleKind::MinMax => (0..d)
            .map(|j| {
                let vals: Vec<f64> = (0..data.n())
                    .filter(|&i| !data.is_missing(i, j))
                    .map(|i| data.row(i)[j])
                    .collect();
                if vals.is_empty() {
                    return Err(Error::Scaling(format!("feature {j} entirely missing")));
                }
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi <= lo {
                    Err(Error::Scaling(format!("feature {j} is constant")))
                } else {
                    Ok((lo, hi - lo))
                }
            })
            .collect::<Result<_>>()?,
    };
    let rows: Vec<DVector<f64>> = (0..data.n())
        .map(|i| {
            DVector::from_fn(d, |j, _| {
                if data.is_missing(i, j) {
                    data.row(i)[j]
                } else {
                    let (shift, scale) = transforms[j];
                    (data.row(i)[j] - shift) / scale
                }
            })
        })
        .collect();
    Ok(DatasetMatrix::from_transformed(
        rows,
        data.mask().to_vec(),
        data.labels().map(|l| l.to_vec()),
    ))
}
