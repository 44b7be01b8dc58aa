//! Evaluable privacy-loss curves.
//!
//! A curve is a closed-form contract, never a tabulated array, so the
//! accountant can optimize over the order continuously. Each curve carries its
//! validity domain and, when it exists, a finite infinite-order limit (used by
//! the accountant's c = 1 and c -> infinity endpoints).

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

type RdpEval = dyn Fn(f64) -> Result<f64> + Send + Sync;
type SrdpEval = dyn Fn(f64, f64) -> Result<f64> + Send + Sync;
type SrdpLimit = dyn Fn(f64) -> Option<f64> + Send + Sync;

/// Privacy-loss contract `alpha -> eps(alpha)` for orders alpha > 1.
#[derive(Clone)]
pub struct RdpCurve {
    eval: Arc<RdpEval>,
    /// Finite limit of eps(alpha) as alpha -> infinity, when one exists.
    limit_inf: Option<f64>,
    label: String,
}

impl fmt::Debug for RdpCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RdpCurve({})", self.label)
    }
}

impl RdpCurve {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
        limit_inf: Option<f64>,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            limit_inf,
            label: label.into(),
        }
    }

    /// Evaluate at order `alpha`; errors if `alpha` is outside the domain.
    pub fn eval(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 1.0) {
            return Err(Error::Domain(format!(
                "{}: order alpha = {alpha} must exceed 1",
                self.label
            )));
        }
        (self.eval)(alpha)
    }

    /// eps at alpha -> infinity, if finite.
    pub fn limit_inf(&self) -> Option<f64> {
        self.limit_inf
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Smooth privacy-loss contract `(alpha, tau) -> eps(alpha, tau)`; tau bounds
/// the row-wise L2 mass by which the compared datasets may differ. Always 0 at
/// tau = 0.
#[derive(Clone)]
pub struct SrdpCurve {
    eval: Arc<SrdpEval>,
    limit_inf: Arc<SrdpLimit>,
    label: String,
}

impl fmt::Debug for SrdpCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SrdpCurve({})", self.label)
    }
}

impl SrdpCurve {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64, f64) -> Result<f64> + Send + Sync + 'static,
        limit_inf: impl Fn(f64) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            limit_inf: Arc::new(limit_inf),
            label: label.into(),
        }
    }

    /// Evaluate at `(alpha, tau)`. Identical datasets (tau = 0) always cost 0.
    pub fn eval(&self, alpha: f64, tau: f64) -> Result<f64> {
        if !(alpha > 1.0) {
            return Err(Error::Domain(format!(
                "{}: order alpha = {alpha} must exceed 1",
                self.label
            )));
        }
        if tau < 0.0 {
            return Err(Error::Parameter(format!("{}: tau = {tau} < 0", self.label)));
        }
        if tau == 0.0 {
            return Ok(0.0);
        }
        (self.eval)(alpha, tau)
    }

    /// eps(alpha -> infinity, tau), if finite at this tau. Zero at tau = 0.
    pub fn limit_inf(&self, tau: f64) -> Option<f64> {
        if tau == 0.0 {
            return Some(0.0);
        }
        (self.limit_inf)(tau)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Sequential composition: the sum of the component curves.
    pub fn sum(curves: Vec<SrdpCurve>) -> SrdpCurve {
        let label = format!(
            "sum[{}]",
            curves
                .iter()
                .map(|c| c.label.as_str())
                .collect::<Vec<_>>()
                .join("+")
        );
        let for_limit = curves.clone();
        SrdpCurve::new(
            label,
            move |alpha, tau| curves.iter().map(|c| c.eval(alpha, tau)).sum(),
            move |tau| {
                for_limit
                    .iter()
                    .map(|c| c.limit_inf(tau))
                    .try_fold(0.0, |acc, v| v.map(|x| acc + x))
            },
        )
    }
}

/// True iff `curve` is non-decreasing along the given order grid.
pub fn check_rdp_monotonic(curve: &RdpCurve, alphas: &[f64]) -> Result<bool> {
    let mut prev = f64::NEG_INFINITY;
    for &a in alphas {
        let v = curve.eval(a)?;
        if v < prev - 1e-12 {
            return Ok(false);
        }
        prev = v;
    }
    Ok(true)
}

/// True iff `curve` is non-decreasing along each axis of the (alpha, tau) grid.
pub fn check_srdp_monotonic(curve: &SrdpCurve, alphas: &[f64], taus: &[f64]) -> Result<bool> {
    // along tau for each fixed alpha
    for &a in alphas {
        let mut prev = f64::NEG_INFINITY;
        for &t in taus {
            let v = curve.eval(a, t)?;
            if v < prev - 1e-12 {
                return Ok(false);
            }
            prev = v;
        }
    }
    // along alpha for each fixed tau
    for &t in taus {
        let mut prev = f64::NEG_INFINITY;
        for &a in alphas {
            let v = curve.eval(a, t)?;
            if v < prev - 1e-12 {
                return Ok(false);
            }
            prev = v;
        }
    }
    Ok(true)
}
