//! Seeded noise primitives shared by the mechanisms, the PTR test and the
//! Monte-Carlo oracles. All randomness in the crate flows through a
//! [`rand_chacha::ChaCha8Rng`] so that every run is reproducible from a 64-bit
//! seed.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Deterministic RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream for a sub-task (trial index, arm index, ...).
pub fn rng_substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One standard Gaussian draw scaled to `std`.
pub fn gaussian<R: Rng>(rng: &mut R, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * std
}

/// Vector of iid Gaussian draws.
pub fn gaussian_vector<R: Rng>(rng: &mut R, dim: usize, std: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| gaussian(rng, std))
}

/// One Laplace draw with the given scale, via the inverse CDF.
pub fn laplace<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    // u in (-1/2, 1/2), open at both ends to keep the log finite
    let mut u: f64 = rng.gen::<f64>() - 0.5;
    if u == 0.5 || u == -0.5 {
        u = 0.0;
    }
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Vector of iid Laplace draws.
pub fn laplace_vector<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| laplace(rng, scale))
}

/// Euclidean projection onto the unit ball.
pub fn project_unit_ball(v: &DVector<f64>) -> DVector<f64> {
    let norm = v.norm();
    if norm > 1.0 {
        v / norm
    } else {
        v.clone()
    }
}
