//! Propose-test-release for the rank-reduction + noisy-gradient pipeline.
//!
//! The release test uses a conservative surrogate for the distance to the
//! nearest unstable dataset: the k-th eigen-gap of the empirical covariance
//! moves by at most 12.2/n under a one-record swap (n >= 101), so
//! (gap - beta) * n / 12.2 lower-bounds the Hamming distance to any dataset
//! whose gap falls below beta. The surrogate has sensitivity at most 1, which
//! is what the Laplace test needs.

use crate::budget::{PrivacyBudget, Provenance};
use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use crate::mechanisms::{run_dp_gd_traced, GdTrace, LossGrad, MechanismSpec};
use crate::preprocessing::{apply_pca, eigen_gap, PcaMode};
use crate::sampling::{laplace, rng_from_seed};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Eigen-gap Lipschitz constant of a one-record swap, valid for n >= 101.
pub const EIGEN_GAP_SWAP_BOUND: f64 = 12.2;

/// Parameters of a propose-test-release run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtrConfig {
    /// Proposed lower bound on the k-th eigen-gap.
    pub beta: f64,
    pub eps: f64,
    pub delta: f64,
    /// Target rank of the reduction.
    pub k: usize,
    /// Lipschitz constant of the loss.
    pub l: f64,
    /// Smoothness of the loss with respect to data perturbations.
    pub mu: f64,
    /// Gradient-descent iterations of the release branch.
    pub t: u64,
    /// Learning rate of the release branch.
    pub lr: f64,
    /// Optional norm-clipping threshold applied before the rank reduction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
}

impl PtrConfig {
    /// Checks required to run the procedure at all.
    pub fn validate_for_run(&self, n: usize, d: usize) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::Config("beta must be > 0".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be > 0".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config("delta must lie in (0, 1)".into()));
        }
        if n < 101 {
            return Err(Error::Config(
                "the surrogate statistic requires n >= 101".into(),
            ));
        }
        if self.k == 0 || self.k >= d {
            return Err(Error::Config(format!("k must be in 1..{d}")));
        }
        if self.t < 1 || !(self.lr > 0.0) || !(self.l > 0.0) || !(self.mu > 0.0) {
            return Err(Error::Config("t, lr, l, mu must be positive".into()));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Config("clip threshold must be > 0".into()));
            }
        }
        Ok(())
    }

    /// The additional condition the privacy statement needs from delta.
    pub fn delta_precondition_bound(&self) -> f64 {
        let ratio = EIGEN_GAP_SWAP_BOUND * self.mu / (self.l * self.beta);
        (-1.05 * self.eps * self.eps * (1.0 + ratio * ratio)).exp()
    }
}

/// Outcome of a run: abort carries nothing beyond the single bit.
#[derive(Debug, Clone, PartialEq)]
pub enum PtrOutcome {
    Abort,
    Model {
        params: DVector<f64>,
        trace: GdTrace,
    },
}

impl PtrOutcome {
    pub fn is_abort(&self) -> bool {
        matches!(self, PtrOutcome::Abort)
    }
}

/// Surrogate distance statistic plus Laplace(1/eps) noise. Negative surrogate
/// values clamp to zero (a distance cannot be negative).
pub fn ptr_test_statistic(
    data: &DatasetMatrix,
    k: usize,
    beta: f64,
    eps: f64,
    seed: u64,
) -> Result<f64> {
    if data.n() < 101 {
        return Err(Error::Config(
            "the surrogate statistic requires n >= 101".into(),
        ));
    }
    let gap = eigen_gap(data, k)?;
    let surrogate = ((gap - beta) * data.n() as f64 / EIGEN_GAP_SWAP_BOUND).max(0.0);
    let mut rng = rng_from_seed(seed);
    Ok(surrogate + laplace(&mut rng, 1.0 / eps))
}

/// Clip every row to norm at most `c`.
fn clip_rows(data: &DatasetMatrix, c: f64) -> DatasetMatrix {
    let rows: Vec<DVector<f64>> = data
        .rows()
        .iter()
        .map(|r| {
            let norm = r.norm();
            if norm > c {
                r * (c / norm)
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

/// Run the propose-test-release procedure: abort unless the noisy surrogate
/// clears log(2/delta)/eps, otherwise rank-reduce and train with noise
/// sigma = 2 L sqrt(T) / (eps n).
pub fn run_ptr(
    data: &DatasetMatrix,
    config: &PtrConfig,
    loss_grad: LossGrad,
    seed: u64,
) -> Result<PtrOutcome> {
    config.validate_for_run(data.n(), data.d())?;
    let mut rng = rng_from_seed(seed);

    let test_input = match config.clip {
        Some(c) => clip_rows(data, c),
        None => data.clone(),
    };
    let gap = eigen_gap(&test_input, config.k)?;
    let n = data.n() as f64;
    let surrogate = ((gap - config.beta) * n / EIGEN_GAP_SWAP_BOUND).max(0.0);
    let statistic = surrogate + laplace(&mut rng, 1.0 / config.eps);
    let threshold = (2.0 / config.delta).ln() / config.eps;
    if statistic <= threshold {
        return Ok(PtrOutcome::Abort);
    }

    let reduced = apply_pca(&test_input, config.k, PcaMode::Rank)?;
    let mut spec = MechanismSpec::dp_gd(
        config.l,
        config.mu,
        config.eps,
        config.t,
        data.n(),
        config.lr,
    );
    // release branch runs at twice the base noise
    spec.sigma = Some(2.0 * config.l * (config.t as f64).sqrt() / (config.eps * n));
    spec.eps = config.eps / 2.0; // keeps sigma = L sqrt(T) / ((eps/2) n) consistent
    let init = DVector::zeros(reduced.d());
    let (params, trace) =
        run_dp_gd_traced(&spec, loss_grad, &reduced, &init, seed.wrapping_add(1))?;
    Ok(PtrOutcome::Model { params, trace })
}

/// End-to-end budget of the procedure:
/// (3 eps sqrt(1.05 (1 + 12.2^2 mu^2 / (L^2 beta^2)) ln(1/delta)) + eps, delta).
/// Errors when delta violates the statement's precondition.
pub fn ptr_privacy_budget(config: &PtrConfig, n: usize) -> Result<PrivacyBudget> {
    if n < 101 {
        return Err(Error::Config(
            "the privacy statement requires n >= 101".into(),
        ));
    }
    let bound = config.delta_precondition_bound();
    if config.delta > bound {
        return Err(Error::Config(format!(
            "delta = {} violates the precondition delta <= {bound:e}",
            config.delta
        )));
    }
    let ratio = match config.clip {
        // clipping scales the covariance displacement by C/R; R = 1 for
        // unit-ball data, so C is the scale factor directly
        Some(c) => EIGEN_GAP_SWAP_BOUND * c.min(1.0) * config.mu / (config.l * config.beta),
        None => EIGEN_GAP_SWAP_BOUND * config.mu / (config.l * config.beta),
    };
    let eps_hat =
        3.0 * config.eps * (1.05 * (1.0 + ratio * ratio) * (1.0 / config.delta).ln()).sqrt();
    let alpha = (1.0 / config.delta).ln().sqrt()
        / (1.05 * config.eps * config.eps * (1.0 + ratio * ratio)).sqrt()
        + 1.0;
    Ok(PrivacyBudget {
        alpha,
        eps_hat,
        eps_dp: eps_hat + config.eps,
        delta_dp: config.delta,
        provenance: Provenance {
            mechanism: "dp-gd".into(),
            preproc: "pca-rank~ptr".into(),
            alpha,
            c1: 2.0,
            c2: 2.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn config(beta: f64, eps: f64, delta: f64, k: usize) -> PtrConfig {
        PtrConfig {
            beta,
            eps,
            delta,
            k,
            l: 1.0,
            mu: 1.0,
            t: 5,
            lr: 0.1,
            clip: None,
        }
    }

    fn spread_data(n: usize, d: usize, scales: &[f64], seed: u64) -> DatasetMatrix {
        let mut rng = crate::sampling::rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r: Vec<f64> = (0..d)
                    .map(|j| rng.gen_range(-1.0..1.0) * scales.get(j).copied().unwrap_or(0.01))
                    .collect();
                let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1.0 {
                    for v in r.iter_mut() {
                        *v /= norm;
                    }
                }
                r
            })
            .collect();
        DatasetMatrix::new(rows).unwrap()
    }

    #[test]
    fn statistic_zero_gap_margin_is_noise_only() {
        let data = spread_data(101, 4, &[0.9, 0.2, 0.05, 0.01], 3);
        let gap = eigen_gap(&data, 1).unwrap();
        // beta = gap: surrogate clamps to 0, statistic is the Laplace draw
        let s = ptr_test_statistic(&data, 1, gap, 1.0, 7).unwrap();
        let mut rng = rng_from_seed(7);
        let noise = laplace(&mut rng, 1.0);
        assert!((s - noise).abs() < 1e-12);
    }

    #[test]
    fn statistic_surrogate_margin_in_units_of_swaps() {
        let data = spread_data(101, 4, &[0.9, 0.2, 0.05, 0.01], 4);
        let gap = eigen_gap(&data, 1).unwrap();
        let m = 3.0;
        let beta = gap - EIGEN_GAP_SWAP_BOUND * m / 101.0;
        let s = ptr_test_statistic(&data, 1, beta, 1.0, 9).unwrap();
        let mut rng = rng_from_seed(9);
        let noise = laplace(&mut rng, 1.0);
        assert!((s - (m + noise)).abs() < 1e-9);
    }

    #[test]
    fn statistic_distribution_matches_shifted_laplace() {
        // KS distance between 10^4 draws and the shifted Laplace CDF
        let data = spread_data(101, 4, &[0.9, 0.2, 0.05, 0.01], 5);
        let gap = eigen_gap(&data, 1).unwrap();
        let m = 2.0;
        let beta = gap - EIGEN_GAP_SWAP_BOUND * m / 101.0;
        let eps = 1.0;
        let n_draws = 10_000;
        let mut draws: Vec<f64> = (0..n_draws)
            .map(|s| ptr_test_statistic(&data, 1, beta, eps, s as u64).unwrap())
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = |x: f64| {
            let z = x - m;
            if z < 0.0 {
                0.5 * (z * eps).exp()
            } else {
                1.0 - 0.5 * (-z * eps).exp()
            }
        };
        let mut ks: f64 = 0.0;
        for (i, &x) in draws.iter().enumerate() {
            let emp_hi = (i + 1) as f64 / n_draws as f64;
            let emp_lo = i as f64 / n_draws as f64;
            let c = cdf(x);
            ks = ks.max((emp_hi - c).abs()).max((c - emp_lo).abs());
        }
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn abort_bit_depends_on_data_only_through_the_gap() {
        // two different datasets with identical eigen-gap (one is a rotation
        // of the other) and the same seed produce the same bit
        let data = spread_data(101, 4, &[0.9, 0.2, 0.05, 0.01], 6);
        // rotate features 0 and 1 by 90 degrees: (x, y) -> (-y, x)
        let rot: Vec<Vec<f64>> = data
            .rows()
            .iter()
            .map(|r| vec![-r[1], r[0], r[2], r[3]])
            .collect();
        let rotated = DatasetMatrix::new(rot).unwrap();
        let g1 = eigen_gap(&data, 1).unwrap();
        let g2 = eigen_gap(&rotated, 1).unwrap();
        assert!((g1 - g2).abs() < 1e-9);
        let cfg = config(g1 + 0.01, 1.0, 1e-4, 1);
        let grad = |_: &DVector<f64>, _: &DVector<f64>, _: Option<f64>| DVector::zeros(4);
        for seed in 0..50 {
            let a = run_ptr(&data, &cfg, &grad, seed).unwrap().is_abort();
            let b = run_ptr(&rotated, &cfg, &grad, seed).unwrap().is_abort();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn release_branch_is_reproducible() {
        let data = spread_data(120, 4, &[0.9, 0.2, 0.05, 0.01], 8);
        let gap = eigen_gap(&data, 1).unwrap();
        let cfg = config(gap / 2.0, 50.0, 1e-4, 1);
        let grad = |_: &DVector<f64>, _: &DVector<f64>, _: Option<f64>| DVector::zeros(4);
        let a = run_ptr(&data, &cfg, &grad, 11).unwrap();
        let b = run_ptr(&data, &cfg, &grad, 11).unwrap();
        assert_eq!(a, b);
        match a {
            PtrOutcome::Model { params, .. } => assert_eq!(params.len(), 4),
            PtrOutcome::Abort => panic!("expected release at large eps"),
        }
    }

    #[test]
    fn budget_formula_instance() {
        // eps=1, delta=1e-6, beta=12.2, mu=L=1 -> 3 sqrt(1.05 * 2 * ln(1e6))
        let cfg = config(EIGEN_GAP_SWAP_BOUND, 1.0, 1e-6, 1);
        let b = ptr_privacy_budget(&cfg, 101).unwrap();
        let expect = 3.0 * (1.05 * 2.0 * (1e6f64).ln()).sqrt();
        assert!((b.eps_hat - expect).abs() < 1e-12);
        assert!((b.eps_dp - (expect + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn budget_beta_large_limit() {
        let cfg = config(1e9, 1.0, 1e-6, 1);
        let b = ptr_privacy_budget(&cfg, 101).unwrap();
        let expect = 3.0 * (1.05 * (1e6f64).ln()).sqrt();
        assert!((b.eps_hat - expect).abs() < 1e-6);
    }

    #[test]
    fn budget_rejects_precondition_violation() {
        // large eps with delta = 0.5 cannot satisfy the statement
        let cfg = config(1.0, 3.0, 0.5, 1);
        assert!(matches!(
            ptr_privacy_budget(&cfg, 101),
            Err(Error::Config(_))
        ));
        // run_ptr itself still accepts such configs
        let data = spread_data(101, 3, &[0.9, 0.1, 0.01], 10);
        let grad = |_: &DVector<f64>, _: &DVector<f64>, _: Option<f64>| DVector::zeros(3);
        assert!(run_ptr(&data, &cfg, &grad, 0).is_ok());
    }

    #[test]
    fn surrogate_sensitivity_under_swaps() {
        // |surrogate(S) - surrogate(S')| <= 1 over random neighbor swaps
        let mut rng = crate::sampling::rng_from_seed(14);
        let data = spread_data(
            101,
            10,
            &[0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.04, 0.03, 0.02, 0.01],
            15,
        );
        let k = 2;
        let beta = 0.01;
        let nf = 101.0;
        let surr = |d: &DatasetMatrix| {
            ((eigen_gap(d, k).unwrap() - beta) * nf / EIGEN_GAP_SWAP_BOUND).max(0.0)
        };
        let s0 = surr(&data);
        for _ in 0..50 {
            let i = rng.gen_range(0..data.n());
            let mut row: Vec<f64> = (0..10).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
            let neighbor = data.replace_row(i, row).unwrap();
            assert!((surr(&neighbor) - s0).abs() <= 1.0 + 1e-9);
        }
    }
}
