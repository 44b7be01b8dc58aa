//! Comparison-curve emission: the composed bound versus the group-privacy
//! baseline across quantization, imputation and rank-reduction sweeps.

use crate::accountant::{compose_optimized, group_privacy_baseline, ComposeConfig};
use crate::error::Result;
use crate::mechanisms::{rdp_curve, srdp_curve, MechanismSpec};
use crate::preprocessing::{sensitivity, ImputeModel, PreprocSpec};
use crate::profile::CollectionProfile;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One sweep point: the x coordinate, our composed converted epsilon, and the
/// group-privacy converted epsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub ours: f64,
    pub group_privacy: f64,
}

/// Sweep definitions. Defaults cover small quantization radii, missing-value
/// fractions up to one half, and dataset sizes up to 10^4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSweeps {
    /// (eta, max_cluster) pairs at fixed n.
    pub quant: Vec<(f64, usize)>,
    pub quant_n: usize,
    /// Missing-entry counts p at fixed n.
    pub imputation: Vec<usize>,
    pub imputation_n: usize,
    /// Dataset sizes at fixed eigen-gap.
    pub pca_n: Vec<usize>,
    pub pca_delta_min: f64,
    pub mech_eps: f64,
    pub delta: f64,
}

impl Default for CurveSweeps {
    fn default() -> Self {
        Self {
            quant: (1..=5).map(|mc| (0.2, mc)).collect(),
            quant_n: 100,
            imputation: vec![1, 2, 5, 10, 20, 30, 40, 50],
            imputation_n: 100,
            pca_n: vec![
                101, 158, 251, 398, 631, 1000, 1585, 2512, 3981, 6310, 10_000,
            ],
            pca_delta_min: 0.5,
            mech_eps: 1.0,
            delta: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurves {
    pub quantization: Vec<CurvePoint>,
    pub imputation: Vec<CurvePoint>,
    pub pca: Vec<CurvePoint>,
}

/// Group-privacy baseline minimized over an order grid scaled past the group
/// size.
pub fn group_baseline_optimized(
    rdp: &crate::curves::RdpCurve,
    group_size: usize,
    delta: f64,
) -> Result<f64> {
    let k = group_size as f64;
    let mut best = f64::INFINITY;
    let base = (k / 100.0).max(1.0);
    for j in 0..60 {
        let alpha = k + base * 1.3f64.powi(j);
        let (e, _) = group_privacy_baseline(rdp, group_size, alpha, delta)?;
        best = best.min(e);
    }
    Ok(best)
}

fn ours_converted(
    preproc: &PreprocSpec,
    profile: &CollectionProfile,
    mech_eps: f64,
    delta: f64,
) -> Result<f64> {
    let spec = MechanismSpec::gaussian(1.0, 1.0, mech_eps);
    let rdp = rdp_curve(&spec)?;
    let srdp = srdp_curve(&spec, profile)?;
    let sens = sensitivity(preproc, profile)?;
    let budget = compose_optimized(&rdp, &srdp, &sens, &ComposeConfig::with_delta(delta))?;
    Ok(budget.eps_dp)
}

/// Build the three sweeps for the pre-processed Gaussian mechanism. The
/// baseline group size is the count of rows a one-record swap can change in
/// the pre-processed output: delta_inf plus the swapped row itself, capped at
/// n.
pub fn emit_comparison_curves(sweeps: &CurveSweeps) -> Result<SweepCurves> {
    let gauss = MechanismSpec::gaussian(1.0, 1.0, sweeps.mech_eps);
    let rdp = rdp_curve(&gauss)?;

    let mut quantization = Vec::new();
    for &(eta, mc) in &sweeps.quant {
        let mut profile = CollectionProfile::new(sweeps.quant_n);
        profile.max_cluster = Some(mc);
        let preproc = PreprocSpec::Quantize { eta };
        let sens = sensitivity(&preproc, &profile)?;
        let ours = ours_converted(&preproc, &profile, sweeps.mech_eps, sweeps.delta)?;
        let group =
            group_baseline_optimized(&rdp, (sens.delta_inf + 1).min(sweeps.quant_n), sweeps.delta)?;
        quantization.push(CurvePoint {
            x: eta * sens.delta_inf as f64,
            ours,
            group_privacy: group,
        });
    }

    let mut imputation = Vec::new();
    for &p in &sweeps.imputation {
        let mut profile = CollectionProfile::new(sweeps.imputation_n);
        profile.p = p;
        let preproc = PreprocSpec::Impute {
            model: ImputeModel::Mean,
        };
        let ours = ours_converted(&preproc, &profile, sweeps.mech_eps, sweeps.delta)?;
        let group = group_baseline_optimized(&rdp, (p + 1).min(sweeps.imputation_n), sweeps.delta)?;
        imputation.push(CurvePoint {
            x: p as f64 / sweeps.imputation_n as f64,
            ours,
            group_privacy: group,
        });
    }

    let mut pca = Vec::new();
    for &n in &sweeps.pca_n {
        let mut profile = CollectionProfile::new(n);
        profile.delta_min_k = Some(sweeps.pca_delta_min);
        profile.delta_min_1 = Some(sweeps.pca_delta_min);
        let preproc = PreprocSpec::PcaRank { k: 1 };
        let ours = ours_converted(&preproc, &profile, sweeps.mech_eps, sweeps.delta)?;
        let group = group_baseline_optimized(&rdp, n, sweeps.delta)?;
        pca.push(CurvePoint {
            x: n as f64,
            ours,
            group_privacy: group,
        });
    }

    Ok(SweepCurves {
        quantization,
        imputation,
        pca,
    })
}

impl SweepCurves {
    /// Write `curves_quantization.csv`, `curves_imputation.csv`,
    /// `curves_pca.csv` under `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        for (name, rows) in [
            ("curves_quantization.csv", &self.quantization),
            ("curves_imputation.csv", &self.imputation),
            ("curves_pca.csv", &self.pca),
        ] {
            let mut w = csv::Writer::from_path(dir.join(name))?;
            w.write_record(["x", "ours", "group_privacy"])?;
            for p in rows {
                w.write_record(&[
                    format!("{}", p.x),
                    format!("{}", p.ours),
                    format!("{}", p.group_privacy),
                ])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}
