//! Synthetic approximately-low-rank classification data.

use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use crate::sampling::rng_from_seed;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Configuration of the synthetic-data experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub approx_rank: usize,
    pub class_count: usize,
    pub eps_list: Vec<f64>,
    pub delta: f64,
    pub seeds: Vec<u64>,
    /// Rank target of the pre-processed arm.
    pub k: usize,
    /// Optional clipping threshold as a fraction of the max row norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    /// Full-dimensional noise scale feeding the spectrum tail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_noise: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.approx_rank > self.d {
            return Err(Error::Config("approx_rank must not exceed d".into()));
        }
        if self.eps_list.is_empty() {
            return Err(Error::Config("eps_list must be non-empty".into()));
        }
        if self.class_count != 2 {
            return Err(Error::Config("only 2-class generation is supported".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("need at least one seed".into()));
        }
        if self.k == 0 || self.k > self.d {
            return Err(Error::Config("k must be in 1..=d".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config("delta must lie in (0, 1)".into()));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::Config("clip fraction must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn tail_noise(&self) -> f64 {
        self.tail_noise.unwrap_or(0.003)
    }
}

/// Two Gaussian classes in an `approx_rank`-dimensional informative subspace
/// embedded in d dimensions, plus small full-dimensional noise so the
/// covariance tail stays positive. Rows are rescaled as a block into the unit
/// ball (preserving the spectrum shape); labels are 0/1.
pub fn make_classification(config: &ExperimentConfig, seed: u64) -> Result<DatasetMatrix> {
    config.validate()?;
    let (n, d, r) = (config.n, config.d, config.approx_rank);
    let mut rng = rng_from_seed(seed);

    // orthonormal informative basis
    let g = DMatrix::from_fn(d, r, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    });
    let q = g.qr().q();

    // class centers along the first informative direction; within-class
    // spread decays geometrically across the informative directions so the
    // covariance spectrum has healthy gaps at every rank
    let margin = 2.0;
    let scales: Vec<f64> = (0..r).map(|i| 0.75f64.powi(i as i32)).collect();
    let tail = config.tail_noise();

    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as f64;
        let sign = if label > 0.5 { 1.0 } else { -1.0 };
        let mut coef = DVector::zeros(r);
        for (j, s) in scales.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            coef[j] = z * s;
        }
        coef[0] += sign * margin;
        let mut x = &q * coef;
        if tail > 0.0 {
            for v in x.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += z * tail;
            }
        }
        rows.push(x);
        labels.push(label);
    }

    // block rescale into the unit ball
    let max_norm = rows.iter().map(|r| r.norm()).fold(0.0f64, f64::max);
    let scale = if max_norm > 0.0 {
        0.999 / max_norm
    } else {
        1.0
    };
    let rows: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|r| (r * scale).iter().cloned().collect())
        .collect();
    let mask = vec![vec![false; d]; n];
    DatasetMatrix::with_missing(rows, mask, Some(labels))
}
