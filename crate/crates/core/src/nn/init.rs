use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::{ensure, Result};

/// Tensor of i.i.d. draws from `U[lo, hi)`, reproducible from `seed`.
pub fn uniform_init(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Result<Tensor> {
    ensure!(lo < hi && lo.is_finite() && hi.is_finite(), "need finite lo < hi, got [{lo}, {hi})");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_and_determinism() {
        let a = uniform_init(&[4, 5, 3, 3], -0.2, 0.7, 42).unwrap();
        assert!(a.data().iter().all(|&v| (-0.2..0.7).contains(&v)));
        assert_eq!(a, uniform_init(&[4, 5, 3, 3], -0.2, 0.7, 42).unwrap());
        assert_ne!(a, uniform_init(&[4, 5, 3, 3], -0.2, 0.7, 43).unwrap());
        assert!(uniform_init(&[2], 1.0, 1.0, 0).is_err());
    }
}
