//! Synthetic-data experiment pipeline: the three-arm comparison at matched
//! end-to-end budgets, and the comparison-curve sweeps.

mod curves;
mod synth;

pub use curves::{emit_comparison_curves, CurvePoint, CurveSweeps, SweepCurves};
pub use synth::{make_classification, ExperimentConfig};

use crate::accountant::{compose_optimized, ComposeConfig};
use crate::budget::SensitivityBounds;
use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use crate::mechanisms::{rdp_curve, run_dp_gd, srdp_curve, MechanismSpec};
use crate::preprocessing::{
    apply_pca, covariance, eigen_gap, sensitivity, sorted_eigen, PcaMode, PreprocSpec,
};
use crate::profile::CollectionProfile;
use crate::sampling::{gaussian, project_unit_ball, rng_substream};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

const TRAIN_STEPS: u64 = 150;
const TRAIN_LR: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Preprocessed,
    NoPreproc,
    DpPca,
}

impl Arm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arm::Preprocessed => "preprocessed",
            Arm::NoPreproc => "no-preproc",
            Arm::DpPca => "dp-pca",
        }
    }
}

/// One (target epsilon, arm) cell of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub eps_target: f64,
    pub arm: Arm,
    /// Calibrated mechanism epsilon (per half-budget stage for the DP-PCA arm).
    pub mech_eps: f64,
    pub mean_excess_loss: f64,
    pub std_error: f64,
    pub per_seed: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonTable {
    pub fn entry(&self, eps: f64, arm: Arm) -> Option<&ComparisonEntry> {
        self.entries
            .iter()
            .find(|e| (e.eps_target - eps).abs() < 1e-12 && e.arm == arm)
    }

    pub fn any_infeasible(&self) -> bool {
        self.entries.iter().any(|e| e.error.is_some())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "eps",
            "arm",
            "mech_eps",
            "mean_excess_loss",
            "std_error",
            "seeds",
        ])?;
        for e in &self.entries {
            w.write_record(&[
                format!("{}", e.eps_target),
                e.arm.as_str().to_string(),
                format!("{}", e.mech_eps),
                format!("{}", e.mean_excess_loss),
                format!("{}", e.std_error),
                format!("{}", e.per_seed.len()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean logistic loss of `w` on `data` (labels 0/1 mapped to -1/+1).
pub fn logistic_loss(w: &DVector<f64>, data: &DatasetMatrix) -> f64 {
    let labels = data.labels().expect("labeled data");
    let mut acc = 0.0;
    for (i, x) in data.rows().iter().enumerate() {
        let y = 2.0 * labels[i] - 1.0;
        let m = -y * w.dot(x);
        // ln(1 + e^m), stable for large |m|
        acc += if m > 30.0 { m } else { m.exp().ln_1p() };
    }
    acc / data.n() as f64
}

fn logistic_grad(w: &DVector<f64>, x: &DVector<f64>, y: Option<f64>) -> DVector<f64> {
    let y = 2.0 * y.expect("labeled data") - 1.0;
    let m = y * w.dot(x);
    let s = if m > 30.0 { 0.0 } else { 1.0 / (1.0 + m.exp()) };
    x * (-y * s)
}

/// Ball-constrained non-private minimizer by projected gradient descent, run
/// until the loss improvement drops below 1e-6 of itself (cap 4000 steps).
pub fn nonprivate_minimizer(data: &DatasetMatrix) -> DVector<f64> {
    let mut w = DVector::zeros(data.d());
    let mut prev = logistic_loss(&w, data);
    for _ in 0..4000 {
        let mut grad = DVector::zeros(data.d());
        let labels = data.labels().expect("labeled data");
        for (i, x) in data.rows().iter().enumerate() {
            grad += logistic_grad(&w, x, Some(labels[i]));
        }
        grad /= data.n() as f64;
        w = project_unit_ball(&(&w - 1.0 * grad));
        let cur = logistic_loss(&w, data);
        if (prev - cur).abs() < 1e-6 * prev.max(1e-9) {
            break;
        }
        prev = cur;
    }
    w
}

/// Find the mechanism epsilon whose converted end-to-end budget hits
/// `target_dp` (the map must be non-decreasing in the mechanism epsilon).
pub fn calibrate_mechanism_eps(
    target_dp: f64,
    mut converted: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let mut lo = 1e-9;
    let mut hi = 1.0;
    let floor = converted(lo)?;
    if floor > target_dp {
        return Err(Error::Infeasible(format!(
            "target eps = {target_dp} is below the conversion floor {floor:.4}"
        )));
    }
    let mut guard = 0;
    while converted(hi)? < target_dp {
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Infeasible(
                "calibration did not bracket the target".into(),
            ));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if converted(mid)? < target_dp {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Converted (eps, delta)-DP value of plain DP-GD at mechanism epsilon m.
fn dp_gd_converted(m: f64, n: usize, delta: f64) -> Result<f64> {
    let spec = MechanismSpec::dp_gd(1.0, 1.0, m, TRAIN_STEPS, n, TRAIN_LR);
    let rdp = rdp_curve(&spec)?;
    let srdp = srdp_curve(&spec, &CollectionProfile::new(n))?;
    let cfg = ComposeConfig::with_delta(delta);
    // zero sensitivity: the composition collapses to the plain conversion
    let budget = compose_optimized(&rdp, &srdp, &SensitivityBounds::new(0.0, 0), &cfg)?;
    Ok(budget.eps_dp)
}

/// Converted DP value of a Gaussian mechanism at mechanism epsilon m.
fn gaussian_converted(m: f64, delta: f64) -> f64 {
    let cfg = ComposeConfig::with_delta(delta);
    cfg.alpha_grid
        .iter()
        .map(|&a| a * m * m / 2.0 + (1.0 / delta).ln() / (a - 1.0))
        .fold(f64::INFINITY, f64::min)
}

fn clip_rows_to(data: &DatasetMatrix, c: f64) -> DatasetMatrix {
    let rows: Vec<DVector<f64>> = data
        .rows()
        .iter()
        .map(|r| {
            let nrm = r.norm();
            if nrm > c {
                r * (c / nrm)
            } else {
                r.clone()
            }
        })
        .collect();
    DatasetMatrix::from_transformed(
        rows,
        data.mask().to_vec(),
        data.labels().map(|l| l.to_vec()),
    )
}

/// The pre-processed arm on one dataset: rank reduction, budget-adjusted
/// noisy training, excess loss on the original data.
fn arm_preprocessed(
    data: &DatasetMatrix,
    config: &ExperimentConfig,
    eps_target: f64,
    seed: u64,
    baseline_loss: f64,
) -> Result<(f64, f64)> {
    let train_input = match config.clip {
        Some(frac) => {
            let r_max = data.rows().iter().map(|r| r.norm()).fold(0.0f64, f64::max);
            clip_rows_to(data, frac * r_max)
        }
        None => data.clone(),
    };
    let n = data.n();
    // the collection's eigen-gaps are declared against the unclipped data;
    // clipping enters the budget as the C/R factor on delta2 below
    let gap_k = eigen_gap(data, config.k)?;
    let gap_1 = eigen_gap(data, 1)?;
    let mut profile = CollectionProfile::new(n);
    profile.delta_min_k = Some(gap_k.max(1e-12));
    profile.delta_min_1 = Some(gap_1.max(1e-12));
    let mut sens = sensitivity(&PreprocSpec::PcaRank { k: config.k }, &profile)?;
    if let Some(frac) = config.clip {
        sens.delta2 *= frac;
    }
    let mech_eps = calibrate_mechanism_eps(eps_target, |m| {
        let spec = MechanismSpec::dp_gd(1.0, 1.0, m, TRAIN_STEPS, n, TRAIN_LR);
        let rdp = rdp_curve(&spec)?;
        let srdp = srdp_curve(&spec, &profile)?;
        Ok(compose_optimized(&rdp, &srdp, &sens, &ComposeConfig::with_delta(config.delta))?.eps_dp)
    })?;
    let reduced = apply_pca(&train_input, config.k, PcaMode::Rank)?;
    let spec = MechanismSpec::dp_gd(1.0, 1.0, mech_eps, TRAIN_STEPS, n, TRAIN_LR);
    let w = run_dp_gd(
        &spec,
        &logistic_grad,
        &reduced,
        &DVector::zeros(data.d()),
        seed,
    )?;
    Ok((logistic_loss(&w, data) - baseline_loss, mech_eps))
}

fn arm_no_preproc(
    data: &DatasetMatrix,
    config: &ExperimentConfig,
    eps_target: f64,
    seed: u64,
    baseline_loss: f64,
) -> Result<(f64, f64)> {
    let n = data.n();
    let mech_eps = calibrate_mechanism_eps(eps_target, |m| dp_gd_converted(m, n, config.delta))?;
    let spec = MechanismSpec::dp_gd(1.0, 1.0, mech_eps, TRAIN_STEPS, n, TRAIN_LR);
    let w = run_dp_gd(&spec, &logistic_grad, data, &DVector::zeros(data.d()), seed)?;
    Ok((logistic_loss(&w, data) - baseline_loss, mech_eps))
}

/// DP-PCA arm: half the budget perturbs the covariance (entrywise Gaussian at
/// global sensitivity 2/n), half trains on the noisily-projected data.
fn arm_dp_pca(
    data: &DatasetMatrix,
    config: &ExperimentConfig,
    eps_target: f64,
    seed: u64,
    baseline_loss: f64,
) -> Result<(f64, f64)> {
    let n = data.n();
    let half_delta = config.delta / 2.0;
    let pca_eps =
        calibrate_mechanism_eps(eps_target / 2.0, |m| Ok(gaussian_converted(m, half_delta)))?;
    let noise_std = (2.0 / n as f64) / pca_eps;
    let mut rng = rng_substream(seed, 1);
    let cov = covariance(data)?;
    let d = data.d();
    let mut noisy = cov.clone();
    for i in 0..d {
        for j in i..d {
            let e = gaussian(&mut rng, noise_std);
            noisy[(i, j)] += e;
            if j != i {
                noisy[(j, i)] += e;
            }
        }
    }
    let (_, vectors) = sorted_eigen(&noisy)?;
    let a_k: DMatrix<f64> = vectors.columns(0, config.k).clone_owned();
    let rows: Vec<DVector<f64>> = data
        .rows()
        .iter()
        .map(|x| &a_k * (a_k.transpose() * x))
        .collect();
    let projected = DatasetMatrix::from_transformed(
        rows,
        data.mask().to_vec(),
        data.labels().map(|l| l.to_vec()),
    );
    let mech_eps =
        calibrate_mechanism_eps(eps_target / 2.0, |m| dp_gd_converted(m, n, half_delta))?;
    let spec = MechanismSpec::dp_gd(1.0, 1.0, mech_eps, TRAIN_STEPS, n, TRAIN_LR);
    let w = run_dp_gd(&spec, &logistic_grad, &projected, &DVector::zeros(d), seed)?;
    Ok((logistic_loss(&w, data) - baseline_loss, mech_eps))
}

/// Run the three-arm comparison over every (epsilon, seed) pair. Seeds run in
/// a parallel pool; results reduce deterministically in seed order.
pub fn run_comparison(config: &ExperimentConfig) -> Result<ComparisonTable> {
    config.validate()?;
    // per-seed work: dataset, baseline, and each arm at each epsilon
    type SeedResult = Vec<(f64, Arm, Result<(f64, f64)>)>;
    let per_seed: Vec<SeedResult> = config
        .seeds
        .par_iter()
        .map(|&seed| -> SeedResult {
            let data = match make_classification(config, seed) {
                Ok(d) => d,
                Err(e) => {
                    let msg = e.to_string();
                    return config
                        .eps_list
                        .iter()
                        .flat_map(|&eps| {
                            let msg = msg.clone();
                            [Arm::Preprocessed, Arm::NoPreproc, Arm::DpPca]
                                .into_iter()
                                .map(move |arm| (eps, arm, Err(Error::Config(msg.clone()))))
                        })
                        .collect();
                }
            };
            let w_star = nonprivate_minimizer(&data);
            let base = logistic_loss(&w_star, &data);
            let mut out = Vec::new();
            for &eps in &config.eps_list {
                out.push((
                    eps,
                    Arm::Preprocessed,
                    arm_preprocessed(&data, config, eps, seed, base),
                ));
                out.push((
                    eps,
                    Arm::NoPreproc,
                    arm_no_preproc(&data, config, eps, seed, base),
                ));
                out.push((eps, Arm::DpPca, arm_dp_pca(&data, config, eps, seed, base)));
            }
            out
        })
        .collect();

    let mut entries = Vec::new();
    for &eps in &config.eps_list {
        for arm in [Arm::Preprocessed, Arm::NoPreproc, Arm::DpPca] {
            let mut losses = Vec::new();
            let mut mech_eps = f64::NAN;
            let mut error = None;
            for seed_results in &per_seed {
                for (e, a, r) in seed_results {
                    if (*e - eps).abs() < 1e-12 && *a == arm {
                        match r {
                            Ok((loss, m)) => {
                                losses.push(*loss);
                                mech_eps = *m;
                            }
                            Err(err) => error = Some(err.to_string()),
                        }
                    }
                }
            }
            let mean = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
            let var = if losses.len() > 1 {
                losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>()
                    / (losses.len() - 1) as f64
            } else {
                0.0
            };
            entries.push(ComparisonEntry {
                eps_target: eps,
                arm,
                mech_eps,
                mean_excess_loss: mean,
                std_error: (var / losses.len().max(1) as f64).sqrt(),
                per_seed: losses,
                error,
            });
        }
    }
    Ok(ComparisonTable { entries })
}
