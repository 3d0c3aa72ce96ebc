//! Fixtures shared by the criterion benchmarks.

use rand::Rng as _;
use rand_distr::StandardNormal;
use softcca_core::linalg::center_columns;
use softcca_core::{rng, Matrix};

/// An `m × k` batch of centred standard-normal activations.
pub fn centred_batch(m: usize, k: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, rng::tags::BENCH);
    center_columns(&Matrix::from_fn(m, k, |_, _| r.sample(StandardNormal))).0
}

/// `n` samples in `[0, 1)` of width `d`.
pub fn uniform_inputs(n: usize, d: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, rng::tags::BENCH);
    Matrix::from_fn(n, d, |_, _| r.random())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_is_centred() {
        let z = centred_batch(16, 5, 1);
        for c in 0..5 {
            assert!(z.col(c).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn fixtures_are_seeded() {
        assert_eq!(uniform_inputs(3, 4, 2), uniform_inputs(3, 4, 2));
        assert_ne!(uniform_inputs(3, 4, 2), uniform_inputs(3, 4, 3));
    }
}
