//! Parameters of the admissible dataset collection over which conditional
//! guarantees are stated. Each field is only required by the sensitivities or
//! curves that actually consume it.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Extremes of the order statistics that bound median / trimmed-mean
/// imputation over the collection: `lo` is the smallest lower-bracket value
/// (feature-wise, over all datasets), `hi` the largest upper-bracket value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderStatBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Description of the dataset collection: sizes, missingness, cluster caps,
/// eigen-gaps, feature spreads and the two divergence parameters used by the
/// subsampled / iterated gradient mechanisms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CollectionProfile {
    /// Dataset size n.
    pub n: usize,
    /// Maximum number of missing entries in any dataset.
    #[serde(default)]
    pub p: usize,
    /// Dedup / quantization radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Cap on the size of any good cluster over the collection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cluster: Option<usize>,
    /// Minimum gap between the k-th and (k+1)-th covariance eigenvalues.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_min_k: Option<f64>,
    /// Minimum gap between the 1st and 2nd covariance eigenvalues.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_min_1: Option<f64>,
    /// Minimum per-feature standard deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    /// Eigenvalue bounds of the gram matrix used by regression imputation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    /// Order-statistic brackets for median imputation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_stats: Option<OrderStatBounds>,
    /// Order-statistic brackets for m-trimmed-mean imputation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trimmed_stats: Option<OrderStatBounds>,
    /// Inverse point-wise distance gamma = n/k of the collection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// tau-constrained maximum Hamming distance of the collection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_tilde: Option<usize>,
    /// Differing rows between collection members appear consecutively
    /// (required by the iterated gradient mechanism's smooth curve).
    #[serde(default)]
    pub consecutive_diffs: bool,
    /// Neighboring = add/remove one record instead of replace-one; halves the
    /// dedup/quantization L-infinity sensitivity.
    #[serde(default)]
    pub add_remove_neighbors: bool,
}

impl CollectionProfile {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("profile: n must be >= 1".into()));
        }
        if self.p > self.n {
            return Err(Error::Config("profile: p must not exceed n".into()));
        }
        for (name, v) in [
            ("eta", self.eta),
            ("delta_min_k", self.delta_min_k),
            ("delta_min_1", self.delta_min_1),
            ("sigma_min", self.sigma_min),
            ("lambda_min", self.lambda_min),
            ("lambda_max", self.lambda_max),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::Config(format!("profile: {name} must be > 0")));
                }
            }
        }
        if let Some(g) = self.gamma {
            if !(g >= 1.0) {
                // gamma = n/k with 1 <= k <= n
                return Err(Error::Config("profile: gamma must be >= 1".into()));
            }
        }
        if let Some(k) = self.k_tilde {
            if k > self.n {
                return Err(Error::Config("profile: k_tilde must not exceed n".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn require<T: Copy>(&self, field: Option<T>, name: &str) -> Result<T> {
        field.ok_or_else(|| Error::Config(format!("profile: field `{name}` is required here")))
    }
}
