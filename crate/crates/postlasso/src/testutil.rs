//! Seeded random fixtures for unit tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}
