//! The six private mechanisms: parameter specs, analytic privacy-loss curves
//! (standard and smooth), subsampling amplification, and executable seeded
//! runners (in [`run`]).

mod run;

pub use run::{
    run_dp_gd, run_dp_gd_traced, run_dp_sgd_iter, run_dp_sgd_samp, run_exponential_continuous,
    run_exponential_discrete, run_gaussian, run_laplace, GdTrace, LossGrad,
};

use crate::curves::{RdpCurve, SrdpCurve};
use crate::error::{Error, Result};
use crate::profile::CollectionProfile;
use serde::{Deserialize, Serialize};

const CALIB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    Gaussian,
    Laplace,
    Exponential,
    DpGd,
    DpSgdSamp,
    DpSgdIter,
}

impl MechanismKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismKind::Gaussian => "gaussian",
            MechanismKind::Laplace => "laplace",
            MechanismKind::Exponential => "exponential",
            MechanismKind::DpGd => "dp-gd",
            MechanismKind::DpSgdSamp => "dp-sgd-samp",
            MechanismKind::DpSgdIter => "dp-sgd-iter",
        }
    }
}

/// Mechanism parameters: a kind tag plus the numeric fields the kind needs.
/// Serializes to a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    /// Lipschitz constant of the output / score / loss function.
    pub l: f64,
    /// Smoothness of the loss with respect to data perturbations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Global sensitivity of the output or score function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_sensitivity: Option<f64>,
    /// Target privacy parameter of the mechanism itself.
    pub eps: f64,
    /// Iteration count of the gradient mechanisms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    /// Gradient noise standard deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Learning rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    /// Subsample size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    /// Dataset size the gradient calibrations refer to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl MechanismSpec {
    pub fn gaussian(l: f64, global_sensitivity: f64, eps: f64) -> Self {
        Self {
            kind: MechanismKind::Gaussian,
            l,
            mu: None,
            global_sensitivity: Some(global_sensitivity),
            eps,
            t: None,
            sigma: None,
            lr: None,
            batch: None,
            n: None,
        }
    }

    pub fn laplace(l: f64, global_sensitivity: f64, eps: f64) -> Self {
        Self {
            kind: MechanismKind::Laplace,
            ..Self::gaussian(l, global_sensitivity, eps)
        }
    }

    pub fn exponential(l: f64, global_sensitivity: f64, eps: f64) -> Self {
        Self {
            kind: MechanismKind::Exponential,
            ..Self::gaussian(l, global_sensitivity, eps)
        }
    }

    /// DP-GD with its calibrated noise sigma = L sqrt(T) / (eps n).
    pub fn dp_gd(l: f64, mu: f64, eps: f64, t: u64, n: usize, lr: f64) -> Self {
        Self {
            kind: MechanismKind::DpGd,
            l,
            mu: Some(mu),
            global_sensitivity: None,
            eps,
            t: Some(t),
            sigma: Some(l * (t as f64).sqrt() / (eps * n as f64)),
            lr: Some(lr),
            batch: None,
            n: Some(n),
        }
    }

    /// Subsampled SGD at the minimal admissible noise (c = 1).
    pub fn dp_sgd_samp(l: f64, mu: f64, eps: f64, t: u64, n: usize, lr: f64, batch: usize) -> Self {
        Self {
            kind: MechanismKind::DpSgdSamp,
            batch: Some(batch),
            ..Self::dp_gd(l, mu, eps, t, n, lr)
        }
    }

    /// Iterated SGD with sigma = 8 sqrt(2 ln n) lr L / (eps sqrt(n)).
    pub fn dp_sgd_iter(l: f64, mu: f64, eps: f64, n: usize, lr: f64) -> Self {
        let sigma = 8.0 * (2.0 * (n as f64).ln()).sqrt() * lr * l / (eps * (n as f64).sqrt());
        Self {
            kind: MechanismKind::DpSgdIter,
            l,
            mu: Some(mu),
            global_sensitivity: None,
            eps,
            t: None,
            sigma: Some(sigma),
            lr: Some(lr),
            batch: None,
            n: Some(n),
        }
    }

    fn req_f64(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| {
            Error::Config(format!(
                "{}: field `{name}` is required",
                self.kind.as_str()
            ))
        })
    }

    fn req_usize(&self, v: Option<usize>, name: &str) -> Result<usize> {
        v.ok_or_else(|| {
            Error::Config(format!(
                "{}: field `{name}` is required",
                self.kind.as_str()
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) {
            return Err(Error::Config("L must be > 0".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be > 0".into()));
        }
        match self.kind {
            MechanismKind::Gaussian | MechanismKind::Laplace | MechanismKind::Exponential => {
                let d = self.req_f64(self.global_sensitivity, "global_sensitivity")?;
                if !(d > 0.0) {
                    return Err(Error::Config("global_sensitivity must be > 0".into()));
                }
            }
            MechanismKind::DpGd | MechanismKind::DpSgdSamp => {
                let t = self.t.unwrap_or(0);
                if t < 1 {
                    return Err(Error::Config("T must be >= 1".into()));
                }
                let n = self.req_usize(self.n, "n")?;
                let sigma = self.req_f64(self.sigma, "sigma")?;
                if !(sigma > 0.0) {
                    return Err(Error::Config("sigma must be > 0".into()));
                }
                self.req_f64(self.mu, "mu")?;
                let base = self.l * (t as f64).sqrt() / (self.eps * n as f64);
                if self.kind == MechanismKind::DpGd {
                    if (sigma - base).abs() > CALIB_TOL * base.max(1.0) {
                        return Err(Error::Config(format!(
                            "dp-gd requires sigma = L sqrt(T)/(eps n) = {base}, got {sigma}"
                        )));
                    }
                } else if sigma < base * (1.0 - CALIB_TOL) {
                    return Err(Error::Config(format!(
                        "dp-sgd-samp requires sigma >= L sqrt(T)/(eps n) = {base}, got {sigma}"
                    )));
                }
            }
            MechanismKind::DpSgdIter => {
                let n = self.req_usize(self.n, "n")?;
                let lr = self.req_f64(self.lr, "lr")?;
                let sigma = self.req_f64(self.sigma, "sigma")?;
                self.req_f64(self.mu, "mu")?;
                let base = 8.0 * (2.0 * (n as f64).ln()).sqrt() * lr * self.l
                    / (self.eps * (n as f64).sqrt());
                if (sigma - base).abs() > CALIB_TOL * base.max(1.0) {
                    return Err(Error::Config(format!(
                        "dp-sgd-iter requires sigma = 8 sqrt(2 ln n) lr L/(eps sqrt(n)) = {base}, got {sigma}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Noise scale of the output-perturbation mechanisms (std for Gaussian,
    /// scale for Laplace): global_sensitivity / eps.
    pub fn noise_scale(&self) -> Result<f64> {
        let d = self.req_f64(self.global_sensitivity, "global_sensitivity")?;
        Ok(d / self.eps)
    }
}

/// The privacy-loss curve eps(alpha) of the mechanism.
pub fn rdp_curve(spec: &MechanismSpec) -> Result<RdpCurve> {
    spec.validate()?;
    let eps = spec.eps;
    let label = spec.kind.as_str().to_string();
    Ok(match spec.kind {
        MechanismKind::Gaussian => RdpCurve::new(label, move |a| Ok(a * eps * eps / 2.0), None),
        MechanismKind::Laplace | MechanismKind::Exponential => {
            RdpCurve::new(label, move |_| Ok(eps), Some(eps))
        }
        MechanismKind::DpGd => RdpCurve::new(label, move |a| Ok(2.0 * a * eps * eps), None),
        MechanismKind::DpSgdSamp => {
            let cap = sgd_samp_alpha_cap(spec)?;
            RdpCurve::new(
                label,
                move |a| {
                    if a > cap {
                        return Err(Error::Domain(format!(
                            "dp-sgd-samp: alpha = {a} exceeds the admissible cap {cap}"
                        )));
                    }
                    Ok(a * a * eps * eps / 2.0)
                },
                None,
            )
        }
        MechanismKind::DpSgdIter => {
            let l = spec.l;
            let sigma = spec.sigma.unwrap();
            RdpCurve::new(
                label,
                move |a| {
                    check_iter_sigma(a, 1.0, l, sigma)?;
                    Ok(a * eps * eps / 2.0)
                },
                None,
            )
        }
    })
}

/// The smooth privacy-loss curve eps(alpha, tau) of the mechanism over the
/// collection described by `profile`.
pub fn srdp_curve(spec: &MechanismSpec, profile: &CollectionProfile) -> Result<SrdpCurve> {
    spec.validate()?;
    let eps = spec.eps;
    let l = spec.l;
    let label = format!("{}~smooth", spec.kind.as_str());
    Ok(match spec.kind {
        MechanismKind::Gaussian => {
            let df = spec.noise_scale()? * eps;
            SrdpCurve::new(
                label,
                move |a, t| Ok(a * l * l * t * t * eps * eps / (2.0 * df * df)),
                |_| None,
            )
        }
        MechanismKind::Laplace | MechanismKind::Exponential => {
            let d = spec.noise_scale()? * eps;
            SrdpCurve::new(
                label,
                move |_, t| Ok(l * t * eps / d),
                move |t| Some(l * t * eps / d),
            )
        }
        MechanismKind::DpGd => {
            let mu = spec.mu.unwrap();
            SrdpCurve::new(
                label,
                move |a, t| Ok(a * mu * mu * t * t * eps * eps / (2.0 * l * l)),
                |_| None,
            )
        }
        MechanismKind::DpSgdSamp => {
            let mu = spec.mu.unwrap();
            let gamma = profile.require(profile.gamma, "gamma")?;
            let cap = sgd_samp_alpha_cap(spec)?;
            SrdpCurve::new(
                label,
                move |a, t| {
                    if a > cap {
                        return Err(Error::Domain(format!(
                            "dp-sgd-samp: alpha = {a} exceeds the admissible cap {cap}"
                        )));
                    }
                    Ok(a * mu * mu * t * t * eps * eps * gamma * gamma / (2.0 * l * l))
                },
                |_| None,
            )
        }
        MechanismKind::DpSgdIter => {
            if !profile.consecutive_diffs {
                return Err(Error::Config(
                    "dp-sgd-iter smooth curve requires the profile's consecutive_diffs flag".into(),
                ));
            }
            let mu = spec.mu.unwrap();
            let sigma = spec.sigma.unwrap();
            let n = spec.n.unwrap() as f64;
            let k_tilde = profile.require(profile.k_tilde, "k_tilde")? as f64;
            if k_tilde >= n {
                return Err(Error::Config("k_tilde must be below n".into()));
            }
            SrdpCurve::new(
                label,
                move |a, t| {
                    check_iter_sigma(a, t, l, sigma)?;
                    Ok(a * t * t * mu * mu * n * (n - k_tilde + 2.0).ln()
                        / (2.0 * (n - k_tilde + 1.0) * l * l * n.ln()))
                },
                |_| None,
            )
        }
    })
}

fn sgd_samp_alpha_cap(spec: &MechanismSpec) -> Result<f64> {
    let t = spec.t.unwrap() as f64;
    let n = spec.n.unwrap() as f64;
    let eps = spec.eps;
    let l = spec.l;
    let cap1 = t.sqrt() / eps;
    let cap2 = (l * l * t / (eps * eps * n * n)) * (n * n * eps / (l * t.sqrt())).ln();
    Ok(cap1.min(cap2))
}

fn check_iter_sigma(alpha: f64, tau: f64, l: f64, sigma: f64) -> Result<()> {
    let needed = l * (2.0 * alpha * (alpha - 1.0)).sqrt();
    if needed > sigma {
        return Err(Error::Domain(format!(
            "dp-sgd-iter: constraint L sqrt(2 a(a-1)) <= sigma fails ({needed:.4} > {sigma:.4})"
        )));
    }
    let scaled = tau * needed;
    if scaled > sigma {
        return Err(Error::Domain(format!(
            "dp-sgd-iter: constraint tau L sqrt(2 a(a-1)) <= sigma fails ({scaled:.4} > {sigma:.4})"
        )));
    }
    Ok(())
}

/// Privacy amplification for a smooth curve under uniform size-B subsampling:
/// a two-term mixture of the curve at tau/k and at tau. Valid for integer
/// 1 <= k <= (n-1)/B and only where the base curve satisfies
/// eps(alpha, tau) <= 1/(alpha - 1).
pub fn subsample_amplify(curve: &SrdpCurve, n: usize, batch: usize, k: usize) -> Result<SrdpCurve> {
    if batch < 1 {
        return Err(Error::Parameter("batch size must be >= 1".into()));
    }
    if k < 1 || k * batch > n - 1 {
        return Err(Error::Parameter(format!(
            "k = {k} out of range: need 1 <= k and k*B <= n-1 (n = {n}, B = {batch})"
        )));
    }
    let keep = (1.0 - (k as f64 * batch as f64 - 1.0) / n as f64).powi(batch as i32);
    let base = curve.clone();
    let kf = k as f64;
    let label = format!("{}~subsampled(B={batch},k={k})", curve.label());
    Ok(SrdpCurve::new(
        label,
        move |a, t| {
            let full = base.eval(a, t)?;
            if full > 1.0 / (a - 1.0) {
                return Err(Error::Validity(format!(
                    "subsampling amplification needs eps(alpha, tau) <= 1/(alpha-1); got {full:.6} at alpha = {a}"
                )));
            }
            let near = base.eval(a, t / kf)?;
            Ok(2.0 * keep * near + 2.0 * (1.0 - keep) * full)
        },
        |_| None,
    ))
}
