use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::geometry::{Geometry, Image};
use crate::noise::{apply_poisson_noise, NoiseConfig};
use crate::phantom::random_ellipse_phantom;
use crate::projector::forward_project;
use crate::recon::sirt;

pub const DEFAULT_ELLIPSES: usize = 8;

/// Default field of view: phantoms live on `[-1, 1]^2`, so with a field of
/// view of 2 the line integrals are those of the continuous phantom.
pub const DEFAULT_FOV: f64 = 2.0;

/// Everything needed to regenerate a pair bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub geometry: Geometry,
    pub noise: Option<NoiseConfig>,
    pub phantom_seed: u64,
    pub n_ellipses: usize,
    pub sirt_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    /// SIRT reconstruction of the (possibly noisy) limited-view sinogram.
    pub input: Image,
    /// Ground-truth phantom.
    pub target: Image,
    pub provenance: Provenance,
}

impl Provenance {
    pub fn regenerate(&self) -> Result<DatasetPair> {
        let g = &self.geometry;
        ensure!(g.image_width == g.image_height, "phantoms are square, geometry is {}x{}", g.image_width, g.image_height);
        let target = random_ellipse_phantom(g.image_width, self.n_ellipses, self.phantom_seed)?.with_pixel_size(g.pixel_size);
        let mut sino = forward_project(&target, g)?;
        if let Some(noise) = &self.noise {
            sino = apply_poisson_noise(&sino, noise)?;
        }
        let input = sirt(&sino, g, self.sirt_iterations, None)?;
        Ok(DatasetPair { input, target, provenance: self.clone() })
    }
}

/// Geometry with `n_angles` views over `[0, pi)`, one detector per image
/// column and pixels of size `fov / size`.
pub fn dataset_geometry(size: usize, n_angles: usize, fov: f64) -> Result<Geometry> {
    ensure!(fov > 0.0 && fov.is_finite(), "field of view must be positive, got {fov}");
    Ok(crate::geometry::make_parallel_geometry(n_angles, size, size)?.with_scale(fov / size as f64))
}

/// `n` pairs; pair `i` uses phantom seed `seed + i` and, when noisy, noise
/// seed `noise.seed + i`.
pub fn make_dataset(
    n: usize,
    geometry: &Geometry,
    noise: Option<NoiseConfig>,
    sirt_iters: usize,
    seed: u64,
) -> Result<Vec<DatasetPair>> {
    make_dataset_with(n, geometry, noise, sirt_iters, seed, DEFAULT_ELLIPSES)
}

pub fn make_dataset_with(
    n: usize,
    geometry: &Geometry,
    noise: Option<NoiseConfig>,
    sirt_iters: usize,
    seed: u64,
    n_ellipses: usize,
) -> Result<Vec<DatasetPair>> {
    ensure!(n >= 1, "a dataset needs at least one pair");
    ensure!(sirt_iters >= 1, "SIRT needs at least one iteration");
    if let Some(cfg) = &noise {
        cfg.validate()?;
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            Provenance {
                geometry: *geometry,
                noise: noise.map(|c| NoiseConfig { seed: c.seed.wrapping_add(i), ..c }),
                phantom_seed: seed.wrapping_add(i),
                n_ellipses,
                sirt_iterations: sirt_iters,
            }
            .regenerate()
        })
        .collect()
}
