//! Analytic sensitivity bounds of the pre-processing algorithms over a
//! dataset collection, and the exhaustive empirical probe used to validate
//! them at desk scale.

use super::{ImputeModel, PreprocSpec};
use crate::budget::SensitivityBounds;
use crate::dataset::{hamming_distance, DatasetMatrix};
use crate::error::{Error, Result};
use crate::profile::CollectionProfile;

/// Covariance displacement bound under a one-record swap: 2(3n+2)/(n(n-1)).
pub(crate) fn covariance_swap_bound(n: usize) -> f64 {
    let n = n as f64;
    2.0 * (3.0 * n + 2.0) / (n * (n - 1.0))
}

/// Analytic (delta2, delta_inf) of `spec` over the collection `profile`.
pub fn sensitivity(spec: &PreprocSpec, profile: &CollectionProfile) -> Result<SensitivityBounds> {
    profile.validate()?;
    let n = profile.n;
    let nf = n as f64;
    let p = profile.p;

    let cluster_delta_inf = || -> Result<usize> {
        let cap = profile.require(profile.max_cluster, "max_cluster")?;
        Ok(if profile.add_remove_neighbors {
            cap
        } else {
            2 * cap
        }
        .min(n))
    };

    match spec {
        PreprocSpec::Dedup { .. } => Ok(SensitivityBounds::new(1.0, cluster_delta_inf()?)),
        PreprocSpec::Quantize { eta } => Ok(SensitivityBounds::new(*eta, cluster_delta_inf()?)),
        PreprocSpec::Impute { model } => {
            let delta2 = match model {
                ImputeModel::Mean => {
                    if p >= n {
                        return Err(Error::Config("mean imputation needs p < n".into()));
                    }
                    2.0 / (nf - p as f64)
                }
                ImputeModel::Median => {
                    let stats = profile.require(profile.median_stats, "median_stats")?;
                    (stats.hi - stats.lo).max(0.0)
                }
                ImputeModel::TrimmedMean(m) => {
                    let stats = profile.require(profile.trimmed_stats, "trimmed_stats")?;
                    let kept = nf - 2.0 * *m as f64 - p as f64;
                    if kept < 1.0 {
                        return Err(Error::Config("trimmed mean needs n - 2m - p >= 1".into()));
                    }
                    (stats.hi - stats.lo).max(0.0) / kept
                }
                ImputeModel::LinearRegression => {
                    let lmax = profile.require(profile.lambda_max, "lambda_max")?;
                    let lmin = profile.require(profile.lambda_min, "lambda_min")?;
                    lmax * lmax / ((lmax + 1.0) * lmin * lmin) + 1.0 / lmin
                }
            };
            Ok(SensitivityBounds::new(delta2, p))
        }
        PreprocSpec::PcaDim { .. } | PreprocSpec::PcaRank { .. } => {
            let dk = profile.require(profile.delta_min_k, "delta_min_k")?;
            let d1 = profile.require(profile.delta_min_1, "delta_min_1")?;
            let base = 2.0 * covariance_swap_bound(n) / dk.min(d1);
            let delta2 = match spec {
                PreprocSpec::PcaDim { .. } => 2.0 * base,
                _ => base,
            };
            Ok(SensitivityBounds::new(delta2, n))
        }
        PreprocSpec::StandardScale => {
            let s = profile.require(profile.sigma_min, "sigma_min")?;
            Ok(SensitivityBounds::new(
                2.0 / (s * s * s * nf) + 2.0 / (nf * s),
                n,
            ))
        }
        PreprocSpec::MinMaxScale => Err(Error::Unsupported(
            "no L2 sensitivity bound is available for min-max scaling".into(),
        )),
    }
}

/// Observed (delta2, delta_inf) over the supplied neighboring pairs: the max
/// per-point displacement of a common row under the two fitted
/// pre-processings (displacement 1 when exactly one side removes the row) and
/// the max count of common rows whose images differ.
pub fn empirical_sensitivity(
    spec: &PreprocSpec,
    pairs: &[(DatasetMatrix, DatasetMatrix)],
) -> Result<SensitivityBounds> {
    let mut delta2: f64 = 0.0;
    let mut delta_inf: usize = 0;
    for (idx, (a, b)) in pairs.iter().enumerate() {
        if hamming_distance(a, b)? != 1 {
            return Err(Error::Input(format!(
                "pair {idx} is not neighboring (hamming distance != 1)"
            )));
        }
        let swapped = (0..a.n())
            .find(|&i| a.row(i) != b.row(i) || a.mask()[i] != b.mask()[i])
            .unwrap();
        let img_a = spec.apply_traced(a)?;
        let img_b = spec.apply_traced(b)?;
        let mut changed = 0usize;
        for i in 0..a.n() {
            if i == swapped {
                continue;
            }
            let disp = match (&img_a[i], &img_b[i]) {
                (Some(x), Some(y)) => {
                    if x.len() != y.len() {
                        return Err(Error::Dimension(
                            "pre-processing width differs between neighbors".into(),
                        ));
                    }
                    (x - y).norm()
                }
                (None, None) => 0.0,
                // removal on exactly one side counts as a unit displacement
                _ => 1.0,
            };
            // floating-point noise is not a changed row
            if disp > 1e-12 {
                changed += 1;
            }
            delta2 = delta2.max(disp);
        }
        delta_inf = delta_inf.max(changed);
    }
    Ok(SensitivityBounds::new(delta2, delta_inf))
}
