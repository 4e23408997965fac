//! Synthetic test objects.
//!
//! Both generators evaluate analytic ellipse sums at pixel centres on the
//! normalised square `[-1, 1]^2` (y up) and clip the result to `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure, Result};
use crate::geometry::Image;

/// Ellipse with additive intensity, in normalised coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

/// Intensity of an ellipse sum at a point.
pub fn ellipse_sum(ellipses: &[Ellipse], x: f64, y: f64) -> f64 {
    ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum()
}

/// Modified (high-contrast) Shepp-Logan head, intensities in `[0, 1]`.
pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    const TABLE: [[f64; 6]; 10] = [
        [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
        [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
        [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
        [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
        [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
        [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
        [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
        [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
        [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
        [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
    ];
    TABLE
        .iter()
        .map(|r| Ellipse {
            intensity: r[0],
            semi_x: r[1],
            semi_y: r[2],
            center_x: r[3],
            center_y: r[4],
            rotation: r[5].to_radians(),
        })
        .collect()
}

/// Renders an ellipse sum into a `size x size` image, clipped to `[0, 1]`.
pub fn render_ellipses(ellipses: &[Ellipse], size: usize) -> Image {
    let mut img = Image::zeros(size, size);
    let n = size as f64;
    for row in 0..size {
        let y = 1.0 - (2.0 * row as f64 + 1.0) / n;
        for col in 0..size {
            let x = (2.0 * col as f64 + 1.0) / n - 1.0;
            img.set(col, row, ellipse_sum(ellipses, x, y).clamp(0.0, 1.0));
        }
    }
    img
}

pub fn shepp_logan(size: usize) -> Result<Image> {
    ensure!(size >= 16, "phantom size must be at least 16, got {size}");
    Ok(render_ellipses(&shepp_logan_ellipses(), size))
}

/// Random ellipses drawn from a seeded generator.
///
/// Every ellipse stays inside the inscribed circle, so views from any angle
/// see the whole object.
pub fn random_ellipses(n_ellipses: usize, seed: u64) -> Vec<Ellipse> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_ellipses)
        .map(|_| {
            let r = 0.45 * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            Ellipse {
                intensity: rng.random_range(0.1..0.6),
                semi_x: rng.random_range(0.05..0.4),
                semi_y: rng.random_range(0.05..0.4),
                center_x: r * phi.cos(),
                center_y: r * phi.sin(),
                rotation: rng.random_range(0.0..std::f64::consts::PI),
            }
        })
        .collect()
}

pub fn random_ellipse_phantom(size: usize, n_ellipses: usize, seed: u64) -> Result<Image> {
    ensure!(size >= 16, "phantom size must be at least 16, got {size}");
    ensure!(n_ellipses >= 1, "at least one ellipse is required");
    Ok(render_ellipses(&random_ellipses(n_ellipses, seed), size))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_average_2x(img: &Image) -> Image {
        let s = img.width() / 2;
        let mut out = Image::zeros(s, s);
        for r in 0..s {
            for c in 0..s {
                let v =
                    img.get(2 * c, 2 * r) + img.get(2 * c + 1, 2 * r) + img.get(2 * c, 2 * r + 1) + img.get(2 * c + 1, 2 * r + 1);
                out.set(c, r, v / 4.0);
            }
        }
        out
    }

    #[test]
    fn shepp_logan_centre_is_outer_minus_brain() {
        // At the origin only the skull (1.0) and the brain (-0.8) overlap.
        let expected: f64 = shepp_logan_ellipses().iter().filter(|e| e.contains(0.0, 0.0)).map(|e| e.intensity).sum();
        assert!((expected - 0.2).abs() < 1e-12);
        let img = shepp_logan(128).unwrap();
        for (c, r) in [(63, 63), (64, 63), (63, 64), (64, 64)] {
            assert!((img.get(c, r) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn shepp_logan_zero_outside_skull() {
        let img = shepp_logan(128).unwrap();
        let outer = shepp_logan_ellipses()[0];
        for row in 0..128 {
            for col in 0..128 {
                let x = (2.0 * col as f64 + 1.0) / 128.0 - 1.0;
                let y = 1.0 - (2.0 * row as f64 + 1.0) / 128.0;
                if !outer.contains(x, y) {
                    assert_eq!(img.get(col, row), 0.0);
                }
            }
        }
    }

    #[test]
    fn shepp_logan_resolutions_agree() {
        let small = shepp_logan(64).unwrap();
        let large = block_average_2x(&shepp_logan(128).unwrap());
        let mad: f64 = small.data().iter().zip(large.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / small.len() as f64;
        assert!(mad < 0.05, "mean abs difference {mad}");
    }

    #[test]
    fn too_small_rejected() {
        assert!(shepp_logan(15).is_err());
        assert!(random_ellipse_phantom(15, 3, 0).is_err());
        assert!(random_ellipse_phantom(64, 0, 0).is_err());
    }

    #[test]
    fn random_phantom_is_seeded() {
        let a = random_ellipse_phantom(64, 5, 42).unwrap();
        let b = random_ellipse_phantom(64, 5, 42).unwrap();
        assert_eq!(a, b);
        let c = random_ellipse_phantom(64, 5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn phantoms_in_unit_range_over_seed_sweep() {
        for seed in 0..100 {
            let img = random_ellipse_phantom(32, 8, seed).unwrap();
            assert!(img.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
        let img = random_ellipse_phantom(128, 8, 7).unwrap();
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(img.data().iter().any(|&v| v > 0.0));
    }
}
