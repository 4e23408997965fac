//! Photon-count (Poisson) noise on sinograms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::geometry::Sinogram;
use crate::recon::{log_normalize, transmit};

/// Means at or above this use the rounded normal approximation.
pub const NORMAL_APPROX_THRESHOLD: f64 = 30.0;

pub const DEFAULT_INTENSITIES: [f64; 6] = [1000.0, 2500.0, 5000.0, 10000.0, 20000.0, 50000.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Unattenuated photons per detector pixel.
    pub intensity: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(intensity: f64, seed: u64) -> Result<Self> {
        let cfg = NoiseConfig { intensity, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.intensity > 0.0 && self.intensity.is_finite(), "X-ray intensity must be positive, got {}", self.intensity);
        Ok(())
    }
}

/// Draws one Poisson variate. Inversion by sequential search below
/// [`NORMAL_APPROX_THRESHOLD`], rounded normal (clamped at zero) above.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if mean < NORMAL_APPROX_THRESHOLD {
        let u: f64 = rng.random();
        let mut k = 0u32;
        let mut pk = (-mean).exp();
        let mut cdf = pk;
        // The tail beyond ~mean + 40 sqrt(mean) is below f64 resolution.
        let limit = (mean + 40.0 * mean.sqrt() + 40.0) as u32;
        while u > cdf && k < limit {
            k += 1;
            pk *= mean / k as f64;
            cdf += pk;
        }
        k as f64
    } else {
        let z: f64 = rng.sample(StandardNormal);
        (mean + mean.sqrt() * z).round().max(0.0)
    }
}

/// `log_normalize(Poisson(transmit(p, I0)), I0)` with a seeded generator.
pub fn apply_poisson_noise(sinogram: &Sinogram, config: &NoiseConfig) -> Result<Sinogram> {
    config.validate()?;
    ensure!(sinogram.data().iter().all(|v| v.is_finite() && *v >= 0.0), "sinogram values must be finite and non-negative");
    let expected = transmit(sinogram, config.intensity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let counts = expected.with_data(expected.data().iter().map(|&m| sample_poisson(&mut rng, m)).collect())?;
    log_normalize(&counts, config.intensity)
}
