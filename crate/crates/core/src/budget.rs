//! Sensitivity bounds and composed privacy budgets.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-point displacement bound (L2) and changed-point count bound (L-inf) of
/// a pre-processing algorithm over a dataset collection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBounds {
    /// Max L2 displacement of any retained point under a one-record swap.
    pub delta2: f64,
    /// Max number of points the swap can change in the pre-processed output.
    pub delta_inf: usize,
}

impl SensitivityBounds {
    pub fn new(delta2: f64, delta_inf: usize) -> Self {
        Self { delta2, delta_inf }
    }

    /// The row-wise L2 budget the composition bound charges: delta2 * delta_inf.
    pub fn tau(&self) -> f64 {
        self.delta2 * self.delta_inf as f64
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.delta2 >= 0.0) {
            return Err(Error::Parameter("delta2 must be >= 0".into()));
        }
        if self.delta_inf > n {
            return Err(Error::Parameter(format!(
                "delta_inf = {} exceeds dataset size {n}",
                self.delta_inf
            )));
        }
        Ok(())
    }
}

/// How a budget was assembled: which mechanism and pre-processing were
/// composed and which free parameters won the grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mechanism: String,
    pub preproc: String,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
}

/// An order-alpha privacy statement together with its converted
/// (eps, delta)-DP form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub alpha: f64,
    /// Composed privacy loss at order `alpha`.
    pub eps_hat: f64,
    /// Converted approximate-DP epsilon: eps_hat + ln(1/delta)/(alpha - 1).
    pub eps_dp: f64,
    pub delta_dp: f64,
    pub provenance: Provenance,
}

impl PrivacyBudget {
    /// Build from an order-alpha value, applying the standard conversion.
    pub fn from_rdp(alpha: f64, eps_hat: f64, delta: f64, provenance: Provenance) -> Self {
        let eps_dp = eps_hat + (1.0 / delta).ln() / (alpha - 1.0);
        Self {
            alpha,
            eps_hat,
            eps_dp,
            delta_dp: delta,
            provenance,
        }
    }
}
