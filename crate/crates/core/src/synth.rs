//! Seeded synthetic fixtures. Every generator is a pure function of its
//! arguments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{ActivationVector, WeightTensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows x cols` samples of Normal(0, std): the long-tailed weight shape of
/// trained layers.
pub fn normal_tensor(rows: usize, cols: usize, std: f64, seed: u64) -> WeightTensor {
    let dist = Normal::new(0.0, std).expect("std must be finite and >= 0");
    let mut rng = rng(seed);
    let data = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
    WeightTensor::new(rows, cols, data, format!("normal-{std}-seed{seed}"))
        .expect("generated tensor is valid")
}

pub fn uniform_tensor(rows: usize, cols: usize, max_abs: f64, seed: u64) -> WeightTensor {
    let mut rng = rng(seed);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-max_abs..=max_abs))
        .collect();
    WeightTensor::new(rows, cols, data, format!("uniform-{max_abs}-seed{seed}"))
        .expect("generated tensor is valid")
}

/// Uniform activations in `[0, max]`.
pub fn activations(len: usize, max: f64, seed: u64) -> ActivationVector {
    let mut rng = rng(seed);
    ActivationVector::new((0..len).map(|_| rng.random_range(0.0..=max)).collect())
        .expect("generated activations are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_is_reproducible() {
        assert!(normal_tensor(8, 8, 0.05, 1).bit_eq(&normal_tensor(8, 8, 0.05, 1)));
        assert!(!normal_tensor(8, 8, 0.05, 1).bit_eq(&normal_tensor(8, 8, 0.05, 2)));
        assert_eq!(activations(5, 1.0, 9), activations(5, 1.0, 9));
        assert!(uniform_tensor(4, 4, 0.5, 3).max_abs() <= 0.5);
    }
}
