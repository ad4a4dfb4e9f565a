#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specsmooth_core::operator::build_grid_with_spacing;
use specsmooth_core::{assemble_hamiltonian, eigen_lowest, CoefficientVector, EigenSystem, PotentialSpec};

pub fn fd_system(spec: &PotentialSpec, half_width: f64, spacing: f64, count: usize) -> EigenSystem {
    let grid = build_grid_with_spacing(half_width, spacing).unwrap();
    let ham = assemble_hamiltonian(spec, &grid).unwrap();
    eigen_lowest(&ham, count).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex Gaussian-ish coefficients with entries in the unit square.
pub fn random_coefficients(rng: &mut ChaCha8Rng, len: usize) -> CoefficientVector {
    let c = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    CoefficientVector::new(c).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
