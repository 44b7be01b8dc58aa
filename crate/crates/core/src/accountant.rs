//! Composition of a mechanism's standard and smooth privacy-loss curves with
//! a pre-processing sensitivity into an end-to-end budget.
//!
//! The composed loss at order alpha, with free parameters c1, c2 >= 1, is
//!
//! ```text
//! eps_hat = max{ (a c1 - 1)/(c1 (a - 1)) * srdp(a c1, D2 Dinf) + rdp((c1 a - 1)/(c1 - 1)),
//!                (a c2 - 1)/(c2 (a - 1)) * rdp(a c2)           + srdp((c2 a - 1)/(c2 - 1), D2 Dinf) }
//! ```
//!
//! c = 1 sends the partner order to infinity, so it is admissible only for
//! curves with a finite infinite-order limit; c = infinity sends the partner
//! order to alpha itself and the leading order to infinity.

use crate::budget::{PrivacyBudget, Provenance, SensitivityBounds};
use crate::curves::{RdpCurve, SrdpCurve};
use crate::error::{Error, Result};
use crate::mechanisms::MechanismKind;
use crate::preprocessing::{sensitivity, PreprocSpec};
use crate::profile::CollectionProfile;
use serde::{Deserialize, Serialize};

/// Grid search space of the budget optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeConfig {
    pub alpha_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub target_delta: f64,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self {
            alpha_grid: vec![
                1.5, 2.0, 3.0, 5.0, 8.0, 11.0, 16.0, 32.0, 64.0, 128.0, 256.0,
            ],
            c_grid: vec![1.0, 1.1, 1.5, 2.0, 3.0, 5.0],
            target_delta: 1e-5,
        }
    }
}

impl ComposeConfig {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            target_delta: delta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() || self.c_grid.is_empty() {
            return Err(Error::Config("grids must be non-empty".into()));
        }
        if self.alpha_grid.iter().any(|&a| !(a > 1.0)) {
            return Err(Error::Config("alpha grid entries must exceed 1".into()));
        }
        if self.c_grid.iter().any(|&c| !(c >= 1.0)) {
            return Err(Error::Config("c grid entries must be >= 1".into()));
        }
        if !(self.target_delta > 0.0 && self.target_delta < 1.0) {
            return Err(Error::Config("target delta must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Standard conversion from an order-alpha statement to approximate DP.
pub fn rdp_to_dp(eps_rdp: f64, alpha: f64, delta: f64) -> Result<(f64, f64)> {
    if !(alpha > 1.0) {
        return Err(Error::Parameter("alpha must exceed 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Parameter("delta must lie in (0, 1]".into()));
    }
    Ok((eps_rdp + (1.0 / delta).ln() / (alpha - 1.0), delta))
}

/// The smooth-branch term: prefactor * srdp(alpha*c, tau) + rdp(partner).
fn branch_smooth_first(
    rdp: &RdpCurve,
    srdp: &SrdpCurve,
    tau: f64,
    alpha: f64,
    c: f64,
) -> Result<f64> {
    if c == 1.0 {
        let partner = rdp.limit_inf().ok_or_else(|| {
            Error::Domain(format!(
                "c = 1 needs a finite infinite-order limit of {}",
                rdp.label()
            ))
        })?;
        return Ok(srdp.eval(alpha, tau)? + partner);
    }
    if c.is_infinite() {
        let lead = srdp.limit_inf(tau).ok_or_else(|| {
            Error::Domain(format!(
                "c = inf needs a finite infinite-order limit of {}",
                srdp.label()
            ))
        })?;
        return Ok(alpha / (alpha - 1.0) * lead + rdp.eval(alpha)?);
    }
    let prefactor = (alpha * c - 1.0) / (c * (alpha - 1.0));
    let partner = (c * alpha - 1.0) / (c - 1.0);
    Ok(prefactor * srdp.eval(alpha * c, tau)? + rdp.eval(partner)?)
}

/// The standard-branch term: prefactor * rdp(alpha*c) + srdp(partner, tau).
fn branch_rdp_first(rdp: &RdpCurve, srdp: &SrdpCurve, tau: f64, alpha: f64, c: f64) -> Result<f64> {
    if c == 1.0 {
        let partner = srdp.limit_inf(tau).ok_or_else(|| {
            Error::Domain(format!(
                "c = 1 needs a finite infinite-order limit of {}",
                srdp.label()
            ))
        })?;
        return Ok(rdp.eval(alpha)? + partner);
    }
    if c.is_infinite() {
        let lead = rdp.limit_inf().ok_or_else(|| {
            Error::Domain(format!(
                "c = inf needs a finite infinite-order limit of {}",
                rdp.label()
            ))
        })?;
        return Ok(alpha / (alpha - 1.0) * lead + srdp.eval(alpha, tau)?);
    }
    let prefactor = (alpha * c - 1.0) / (c * (alpha - 1.0));
    let partner = (c * alpha - 1.0) / (c - 1.0);
    Ok(prefactor * rdp.eval(alpha * c)? + srdp.eval(partner, tau)?)
}

/// Composed privacy loss at order `alpha` for the given free parameters.
pub fn compose(
    rdp: &RdpCurve,
    srdp: &SrdpCurve,
    sens: &SensitivityBounds,
    alpha: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::Parameter("alpha must exceed 1".into()));
    }
    if !(c1 >= 1.0 && c2 >= 1.0) {
        return Err(Error::Parameter("c1, c2 must be >= 1".into()));
    }
    let tau = sens.tau();
    let b1 = branch_smooth_first(rdp, srdp, tau, alpha, c1)?;
    let b2 = branch_rdp_first(rdp, srdp, tau, alpha, c2)?;
    Ok(b1.max(b2))
}

/// Composed loss at order `alpha`, free parameters minimized over the c grid
/// (each branch separately: the max of two independent minima).
pub fn compose_best_c(
    rdp: &RdpCurve,
    srdp: &SrdpCurve,
    sens: &SensitivityBounds,
    alpha: f64,
    c_grid: &[f64],
) -> Result<(f64, f64, f64)> {
    let tau = sens.tau();
    let mut best1: Option<(f64, f64)> = None;
    let mut best2: Option<(f64, f64)> = None;
    let mut candidates: Vec<f64> = c_grid.to_vec();
    if !candidates.iter().any(|c| c.is_infinite()) {
        candidates.push(f64::INFINITY);
    }
    for &c in &candidates {
        if let Ok(v) = branch_smooth_first(rdp, srdp, tau, alpha, c) {
            if best1.is_none_or(|(b, _)| v < b) {
                best1 = Some((v, c));
            }
        }
        if let Ok(v) = branch_rdp_first(rdp, srdp, tau, alpha, c) {
            if best2.is_none_or(|(b, _)| v < b) {
                best2 = Some((v, c));
            }
        }
    }
    match (best1, best2) {
        (Some((v1, c1)), Some((v2, c2))) => Ok((v1.max(v2), c1, c2)),
        _ => Err(Error::Infeasible(format!(
            "no admissible c at alpha = {alpha} for {} / {}",
            rdp.label(),
            srdp.label()
        ))),
    }
}

/// Minimize the converted (eps, delta)-DP value over the config grids.
pub fn compose_optimized(
    rdp: &RdpCurve,
    srdp: &SrdpCurve,
    sens: &SensitivityBounds,
    config: &ComposeConfig,
) -> Result<PrivacyBudget> {
    config.validate()?;
    let mut best: Option<PrivacyBudget> = None;
    for &alpha in &config.alpha_grid {
        let Ok((eps_hat, c1, c2)) = compose_best_c(rdp, srdp, sens, alpha, &config.c_grid) else {
            continue;
        };
        let budget = PrivacyBudget::from_rdp(
            alpha,
            eps_hat,
            config.target_delta,
            Provenance {
                mechanism: rdp.label().to_string(),
                preproc: srdp.label().to_string(),
                alpha,
                c1,
                c2,
            },
        );
        if best.as_ref().is_none_or(|b| budget.eps_dp < b.eps_dp) {
            best = Some(budget);
        }
    }
    best.ok_or_else(|| Error::Infeasible("every grid point violated a curve domain".into()))
}

/// Closed-form end-to-end guarantees for the supported (mechanism,
/// pre-processing) combinations, at unit Lipschitz/smoothness/global
/// sensitivity. Requires alpha >= 11 (and n >= 101 for the PCA column).
pub fn table2_closed_form(
    mechanism: MechanismKind,
    preproc: &PreprocSpec,
    profile: &CollectionProfile,
    eps: f64,
    alpha: f64,
) -> Result<f64> {
    use crate::preprocessing::ImputeModel;
    if alpha < 11.0 {
        return Err(Error::Parameter("closed forms require alpha >= 11".into()));
    }
    profile.validate()?;
    let n = profile.n as f64;
    let p_missing = profile.p as f64;

    enum Col {
        Quant(f64),
        MeanImp,
        PcaRank,
        Scale,
    }
    let col = match preproc {
        // deduplication shares the quantization forms at eta = 1
        PreprocSpec::Dedup { .. } => Col::Quant(1.0),
        PreprocSpec::Quantize { eta } => Col::Quant(*eta),
        PreprocSpec::Impute {
            model: ImputeModel::Mean,
        } => Col::MeanImp,
        PreprocSpec::PcaRank { .. } => {
            if profile.n < 101 {
                return Err(Error::Parameter("PCA closed forms require n >= 101".into()));
            }
            Col::PcaRank
        }
        PreprocSpec::StandardScale => Col::Scale,
        other => {
            return Err(Error::Unsupported(format!(
                "no closed form for {}",
                other.label()
            )))
        }
    };

    // the L-infinity sensitivity the closed forms denote by p
    let p_eff = match preproc {
        PreprocSpec::Dedup { .. } | PreprocSpec::Quantize { .. } => {
            sensitivity(preproc, profile)?.delta_inf as f64
        }
        _ => p_missing,
    };
    let delta_min = match col {
        Col::PcaRank => {
            let dk = profile.require(profile.delta_min_k, "delta_min_k")?;
            let d1 = profile.require(profile.delta_min_1, "delta_min_1")?;
            dk.min(d1)
        }
        _ => 0.0,
    };
    let sigma_min = match col {
        Col::Scale => profile.require(profile.sigma_min, "sigma_min")?,
        _ => 0.0,
    };

    let e2 = eps * eps;
    let unsupported = |m: MechanismKind, c: &str| {
        Err(Error::Unsupported(format!(
            "no closed form for {} with {c}",
            m.as_str()
        )))
    };
    match (mechanism, col) {
        (MechanismKind::Gaussian, Col::Quant(eta)) => {
            Ok(1.05 * alpha * e2 * (1.0 + eta * eta * p_eff * p_eff))
        }
        (MechanismKind::Gaussian, Col::MeanImp) => {
            let r = p_missing / (n - p_missing);
            Ok(1.05 * alpha * e2 * (1.0 + 4.0 * r * r))
        }
        (MechanismKind::Gaussian, Col::PcaRank) => {
            Ok(1.05 * alpha * e2 * (1.0 + (12.2 / delta_min) * (12.2 / delta_min)))
        }
        (MechanismKind::Gaussian, Col::Scale) => {
            let t = 4.0 / sigma_min.powi(3);
            Ok(1.05 * alpha * e2 * (1.0 + t * t))
        }
        (MechanismKind::DpGd, Col::Quant(eta)) => {
            Ok(1.05 * alpha * e2 * (4.0 + eta * eta * p_eff * p_eff))
        }
        (MechanismKind::DpGd, Col::MeanImp) => {
            let r = p_missing / (n - p_missing);
            Ok(4.2 * alpha * e2 * (1.0 + r * r))
        }
        (MechanismKind::DpGd, Col::PcaRank) => {
            Ok(1.05 * alpha * e2 * (4.0 + (12.2 / delta_min) * (12.2 / delta_min)))
        }
        (MechanismKind::DpGd, Col::Scale) => {
            let t = 4.0 / sigma_min.powi(3);
            Ok(1.05 * alpha * e2 * (4.0 + t * t))
        }
        (MechanismKind::Laplace | MechanismKind::Exponential, col) => match col {
            Col::Quant(eta) => Ok(eps * (1.0 + eta * p_eff)),
            Col::MeanImp => Ok(eps * (1.0 + 2.0 * p_missing / (n - p_missing))),
            Col::PcaRank => Ok(eps * (1.0 + 12.2 / delta_min)),
            Col::Scale => Ok(eps * (1.0 + 4.0 / sigma_min.powi(3))),
        },
        (MechanismKind::DpSgdSamp, Col::PcaRank) => {
            let t = 12.2 / delta_min;
            Ok(1.05 * alpha * e2 * (2.0 * alpha + t * t))
        }
        (MechanismKind::DpSgdSamp, Col::Scale) => {
            Ok(2.1 * alpha * e2 * (alpha + 8.0 / sigma_min.powi(6)))
        }
        (MechanismKind::DpSgdSamp, Col::Quant(_)) => unsupported(mechanism, "quantization/dedup"),
        (MechanismKind::DpSgdSamp, Col::MeanImp) => unsupported(mechanism, "mean imputation"),
        (MechanismKind::DpSgdIter, Col::Quant(eta)) => {
            let ratio = (n / n.ln()) / ((n - p_eff) / (n - p_eff).ln());
            Ok(1.1 * alpha * e2 * (1.0 + eta * eta * p_eff * p_eff * ratio))
        }
        (MechanismKind::DpSgdIter, Col::MeanImp) => {
            let ratio = (n / n.ln()) * (n - p_missing).ln() / (n - p_missing).powi(3);
            Ok(1.1 * alpha * e2 * (1.0 + 4.0 * p_missing * p_missing * ratio))
        }
        (MechanismKind::DpSgdIter, Col::PcaRank) => unsupported(mechanism, "PCA"),
        (MechanismKind::DpSgdIter, Col::Scale) => unsupported(mechanism, "standard scaling"),
    }
}

/// Group-privacy baseline: the per-unit epsilon solving the fixed point
/// "convert at the deflated delta, then amplify by the group size", i.e.
/// eps0 = (eps_rdp(alpha) (alpha-1) + ln(k/delta)) / (alpha - k), returned as
/// (k * eps0, delta). Infinite when alpha <= k.
pub fn group_privacy_baseline(
    rdp: &RdpCurve,
    group_size: usize,
    alpha: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    if group_size < 1 {
        return Err(Error::Parameter("group size must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter("delta must lie in (0, 1)".into()));
    }
    let k = group_size as f64;
    if alpha <= k {
        return Ok((f64::INFINITY, delta));
    }
    let eps_rdp = rdp.eval(alpha)?;
    let eps0 = (eps_rdp * (alpha - 1.0) + (k / delta).ln()) / (alpha - k);
    Ok((k * eps0, delta))
}
