//! Seeded random generators shared by unit, integration and acceptance tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{DenseTensor, Shape};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, dims: &[usize]) -> DenseTensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let n = shape.num_elems();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseTensor::new(shape, data).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    (&a + a.transpose()) * 0.5
}

/// Symmetric positive definite matrix A Aᵀ + n·I.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    &a * a.transpose() + DMatrix::identity(n, n) * n as f64
}
