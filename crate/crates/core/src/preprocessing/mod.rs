//! The five pre-processing families and their sensitivity bounds.

pub mod clusters;
pub mod impute;
pub mod pca;
pub mod scale;
mod sensitivity;

pub use clusters::{apply_dedup, apply_quantize, find_good_clusters, GoodCluster};
pub use impute::{apply_impute, ImputeModel};
pub use pca::{apply_pca, covariance, eigen_gap, pca_components, sorted_eigen, PcaMode};
pub use scale::{apply_scale, feature_stats, ScaleKind};
pub use sensitivity::{empirical_sensitivity, sensitivity};

use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Which pre-processing to run, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PreprocSpec {
    Dedup { eta: f64 },
    Quantize { eta: f64 },
    Impute { model: ImputeModel },
    PcaDim { k: usize },
    PcaRank { k: usize },
    StandardScale,
    MinMaxScale,
}

impl PreprocSpec {
    pub fn label(&self) -> String {
        match self {
            PreprocSpec::Dedup { eta } => format!("dedup(eta={eta})"),
            PreprocSpec::Quantize { eta } => format!("quantize(eta={eta})"),
            PreprocSpec::Impute { model } => format!("impute({model:?})"),
            PreprocSpec::PcaDim { k } => format!("pca-dim(k={k})"),
            PreprocSpec::PcaRank { k } => format!("pca-rank(k={k})"),
            PreprocSpec::StandardScale => "standard-scale".into(),
            PreprocSpec::MinMaxScale => "min-max-scale".into(),
        }
    }

    pub fn validate(&self, d: usize, n: usize, p: usize) -> Result<()> {
        match self {
            PreprocSpec::Dedup { eta } | PreprocSpec::Quantize { eta } => {
                if !(*eta > 0.0) {
                    return Err(Error::Parameter("eta must be > 0".into()));
                }
            }
            PreprocSpec::PcaDim { k } | PreprocSpec::PcaRank { k } => {
                if *k == 0 || *k > d {
                    return Err(Error::Parameter(format!("k must be in 1..={d}")));
                }
            }
            PreprocSpec::Impute {
                model: ImputeModel::TrimmedMean(m),
            } if 2 * m + p >= n => {
                return Err(Error::Parameter("trimmed mean needs 2m + p < n".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Run the transformation.
    pub fn apply(&self, data: &DatasetMatrix) -> Result<DatasetMatrix> {
        self.validate(data.d(), data.n(), data.missing_count())?;
        match *self {
            PreprocSpec::Dedup { eta } => apply_dedup(data, eta),
            PreprocSpec::Quantize { eta } => apply_quantize(data, eta),
            PreprocSpec::Impute { model } => apply_impute(data, model),
            PreprocSpec::PcaDim { k } => apply_pca(data, k, PcaMode::Dim),
            PreprocSpec::PcaRank { k } => apply_pca(data, k, PcaMode::Rank),
            PreprocSpec::StandardScale => apply_scale(data, ScaleKind::Standard),
            PreprocSpec::MinMaxScale => apply_scale(data, ScaleKind::MinMax),
        }
    }

    /// Run the transformation keeping input-row alignment: entry i is the
    /// image of input row i, or `None` when the row was removed. Used by the
    /// empirical sensitivity probe.
    pub fn apply_traced(&self, data: &DatasetMatrix) -> Result<Vec<Option<DVector<f64>>>> {
        match *self {
            PreprocSpec::Dedup { eta } => {
                let kept = clusters::dedup_kept_mask(data, eta)?;
                Ok(data
                    .rows()
                    .iter()
                    .zip(kept)
                    .map(|(r, k)| if k { Some(r.clone()) } else { None })
                    .collect())
            }
            _ => {
                let out = self.apply(data)?;
                Ok(out.rows().iter().cloned().map(Some).collect())
            }
        }
    }
}
