//! Executable mechanisms. Every runner is a pure function of
//! (spec, data, seed): fixed seeds give byte-identical outputs.

use super::{MechanismKind, MechanismSpec};
use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use crate::sampling::{gaussian_vector, laplace_vector, project_unit_ball, rng_from_seed};
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;

/// Per-point loss gradient: (params, row, label) -> gradient w.r.t. params.
pub type LossGrad<'a> = &'a dyn Fn(&DVector<f64>, &DVector<f64>, Option<f64>) -> DVector<f64>;

/// Iterate norms recorded along a gradient-descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct GdTrace {
    pub iterate_norms: Vec<f64>,
}

fn require_kind(spec: &MechanismSpec, kind: MechanismKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::Config(format!(
            "expected a {} spec, got {}",
            kind.as_str(),
            spec.kind.as_str()
        )));
    }
    spec.validate()
}

/// Output perturbation with Gaussian noise of std global_sensitivity / eps
/// per coordinate.
pub fn run_gaussian(
    spec: &MechanismSpec,
    value_fn: impl Fn(&DatasetMatrix) -> DVector<f64>,
    data: &DatasetMatrix,
    seed: u64,
) -> Result<DVector<f64>> {
    require_kind(spec, MechanismKind::Gaussian)?;
    let value = value_fn(data);
    let mut rng = rng_from_seed(seed);
    let noise = gaussian_vector(&mut rng, value.len(), spec.noise_scale()?);
    Ok(value + noise)
}

/// Output perturbation with Laplace noise of scale global_sensitivity / eps
/// per coordinate.
pub fn run_laplace(
    spec: &MechanismSpec,
    value_fn: impl Fn(&DatasetMatrix) -> DVector<f64>,
    data: &DatasetMatrix,
    seed: u64,
) -> Result<DVector<f64>> {
    require_kind(spec, MechanismKind::Laplace)?;
    let value = value_fn(data);
    let mut rng = rng_from_seed(seed);
    let noise = laplace_vector(&mut rng, value.len(), spec.noise_scale()?);
    Ok(value + noise)
}

/// Exponential mechanism over a finite candidate set: samples index i with
/// probability proportional to exp(eps * Q(w_i, S) / (2 * Delta_Q)).
pub fn run_exponential_discrete(spec: &MechanismSpec, scores: &[f64], seed: u64) -> Result<usize> {
    require_kind(spec, MechanismKind::Exponential)?;
    if scores.is_empty() {
        return Err(Error::Input("empty candidate set".into()));
    }
    let scale = spec.eps / (2.0 * spec.global_sensitivity.unwrap());
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|q| ((q - m) * scale).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut rng = rng_from_seed(seed);
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u <= acc {
            return Ok(i);
        }
    }
    Ok(scores.len() - 1)
}

/// Exponential mechanism over a continuous candidate set via rejection
/// sampling: `proposal` draws uniformly from the bounded score domain and
/// `score_max` bounds the score there.
pub fn run_exponential_continuous(
    spec: &MechanismSpec,
    mut proposal: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> DVector<f64>,
    score: impl Fn(&DVector<f64>) -> f64,
    score_max: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    require_kind(spec, MechanismKind::Exponential)?;
    let scale = spec.eps / (2.0 * spec.global_sensitivity.unwrap());
    let mut rng = rng_from_seed(seed);
    for _ in 0..1_000_000u64 {
        let cand = proposal(&mut rng);
        let q = score(&cand);
        if q > score_max + 1e-12 {
            return Err(Error::Input(format!(
                "score {q} exceeds declared bound {score_max}"
            )));
        }
        let accept = ((q - score_max) * scale).exp();
        if rng.gen::<f64>() <= accept {
            return Ok(cand);
        }
    }
    Err(Error::Numeric(
        "rejection sampling did not accept within the iteration budget".into(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn averaged_noisy_descent(
    data: &DatasetMatrix,
    loss_grad: LossGrad,
    init: &DVector<f64>,
    t_steps: u64,
    lr: f64,
    sigma: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
    batch: Option<usize>,
) -> Result<(DVector<f64>, GdTrace)> {
    let n = data.n();
    let dim = init.len();
    let mut w = init.clone();
    let mut sum = DVector::zeros(dim);
    let mut trace = Vec::with_capacity(t_steps as usize);
    let labels = data.labels();
    let mut index_pool: Vec<usize> = (0..n).collect();
    for _ in 0..t_steps {
        let mut grad = DVector::zeros(dim);
        match batch {
            None => {
                for i in 0..n {
                    grad += loss_grad(&w, data.row(i), labels.map(|l| l[i]));
                }
                grad /= n as f64;
            }
            Some(b) => {
                index_pool.shuffle(rng);
                for &i in index_pool.iter().take(b) {
                    grad += loss_grad(&w, data.row(i), labels.map(|l| l[i]));
                }
                grad /= b as f64;
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        if sigma > 0.0 {
            grad += gaussian_vector(rng, dim, sigma);
        }
        w = project_unit_ball(&(&w - lr * grad));
        trace.push(w.norm());
        sum += &w;
    }
    Ok((
        sum / t_steps as f64,
        GdTrace {
            iterate_norms: trace,
        },
    ))
}

/// Projected noisy full-batch gradient descent; returns the average iterate.
pub fn run_dp_gd(
    spec: &MechanismSpec,
    loss_grad: LossGrad,
    data: &DatasetMatrix,
    init: &DVector<f64>,
    seed: u64,
) -> Result<DVector<f64>> {
    Ok(run_dp_gd_traced(spec, loss_grad, data, init, seed)?.0)
}

/// As [`run_dp_gd`] but also returns the iterate trace.
pub fn run_dp_gd_traced(
    spec: &MechanismSpec,
    loss_grad: LossGrad,
    data: &DatasetMatrix,
    init: &DVector<f64>,
    seed: u64,
) -> Result<(DVector<f64>, GdTrace)> {
    require_kind(spec, MechanismKind::DpGd)?;
    if init.norm() > 1.0 + 1e-9 {
        return Err(Error::Input("init must lie in the unit ball".into()));
    }
    let mut rng = rng_from_seed(seed);
    averaged_noisy_descent(
        data,
        loss_grad,
        init,
        spec.t.unwrap(),
        spec.lr.unwrap_or(0.1),
        spec.sigma.unwrap(),
        &mut rng,
        None,
    )
}

/// Projected noisy minibatch descent (uniform subsample of size B per step);
/// returns the average iterate.
pub fn run_dp_sgd_samp(
    spec: &MechanismSpec,
    loss_grad: LossGrad,
    data: &DatasetMatrix,
    init: &DVector<f64>,
    seed: u64,
) -> Result<DVector<f64>> {
    require_kind(spec, MechanismKind::DpSgdSamp)?;
    let batch = spec
        .batch
        .ok_or_else(|| Error::Config("dp-sgd-samp: field `batch` is required".into()))?;
    if batch < 1 || batch > data.n() {
        return Err(Error::Config("batch must be in 1..=n".into()));
    }
    let mut rng = rng_from_seed(seed);
    averaged_noisy_descent(
        data,
        loss_grad,
        init,
        spec.t.unwrap(),
        spec.lr.unwrap_or(0.1),
        spec.sigma.unwrap(),
        &mut rng,
        Some(batch),
    )
    .map(|(w, _)| w)
}

/// Fixed-order single-pass noisy descent released at a uniformly random stop
/// time in 1..=n-k_tilde+1.
pub fn run_dp_sgd_iter(
    spec: &MechanismSpec,
    loss_grad: LossGrad,
    data: &DatasetMatrix,
    init: &DVector<f64>,
    k_tilde: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    require_kind(spec, MechanismKind::DpSgdIter)?;
    let n = data.n();
    if k_tilde >= n {
        return Err(Error::Config("k_tilde must be below n".into()));
    }
    let mut rng = rng_from_seed(seed);
    let stop = rng.gen_range(1..=(n - k_tilde + 1));
    let lr = spec.lr.unwrap();
    let sigma = spec.sigma.unwrap();
    let labels = data.labels();
    let mut w = init.clone();
    for i in 0..stop {
        let mut grad = loss_grad(&w, data.row(i), labels.map(|l| l[i]));
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        grad += gaussian_vector(&mut rng, w.len(), sigma);
        w = project_unit_ball(&(&w - lr * grad));
    }
    Ok(w)
}
