//! Total-variation regularised least squares,
//! `min_{x >= 0} 1/2 ||A x - p||^2 + lambda * s^2 * TV(x)`,
//! solved with the Chambolle-Pock primal-dual method. `s` is the pixel size,
//! so `lambda` is stated for unit pixels and the solution does not depend on
//! the physical scale of the geometry.
//!
//! The gradient block is rescaled so that it has the same operator norm as
//! `A`; the TV weight is divided by the same factor, which leaves the problem
//! unchanged but balances the two dual updates.

use crate::error::{ensure, Result};
use crate::geometry::{Geometry, Image, Sinogram};
use crate::projector::ProjectionOperator;

pub const DEFAULT_TV_WEIGHT: f64 = 0.1;
pub const DEFAULT_TV_ITERATIONS: usize = 200;

/// Upper bound of the forward-difference gradient norm, `sqrt(8)`.
const GRAD_NORM: f64 = 2.828_427_124_746_190_3;

/// Forward differences with a zero last difference (Neumann boundary).
pub fn gradient(x: &[f64], width: usize, height: usize, gx: &mut [f64], gy: &mut [f64]) {
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            gx[i] = if c + 1 < width { x[i + 1] - x[i] } else { 0.0 };
            gy[i] = if r + 1 < height { x[i + width] - x[i] } else { 0.0 };
        }
    }
}

/// Adjoint of [`gradient`] (negative divergence), accumulated into `out`.
pub fn gradient_adjoint_add(gx: &[f64], gy: &[f64], width: usize, height: usize, scale: f64, out: &mut [f64]) {
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if c + 1 < width {
                out[i] -= scale * gx[i];
                out[i + 1] += scale * gx[i];
            }
            if r + 1 < height {
                out[i] -= scale * gy[i];
                out[i + width] += scale * gy[i];
            }
        }
    }
}

/// Isotropic total variation.
pub fn total_variation(image: &Image) -> f64 {
    let (w, h) = (image.width(), image.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    gradient(image.data(), w, h, &mut gx, &mut gy);
    gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).sum()
}

/// Largest singular value of `A` by power iteration on `A^T A`.
pub fn operator_norm(op: &ProjectionOperator, iterations: usize) -> f64 {
    let g = op.geometry();
    let mut v = vec![1.0 / (g.n_pixels() as f64).sqrt(); g.n_pixels()];
    let mut av = vec![0.0; g.n_rays()];
    let mut atav = vec![0.0; g.n_pixels()];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        op.forward_into(&v, &mut av);
        op.back_into(&av, &mut atav);
        let norm = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm;
        v.iter_mut().zip(&atav).for_each(|(vi, ai)| *vi = ai / norm);
    }
    estimate.sqrt()
}

pub fn tvmin(sinogram: &Sinogram, geometry: &Geometry, iterations: usize, tv_weight: f64) -> Result<Image> {
    geometry.check_sinogram(sinogram)?;
    ensure!(iterations >= 1, "TV-min needs at least one iteration");
    ensure!(tv_weight >= 0.0 && tv_weight.is_finite(), "TV weight must be non-negative, got {tv_weight}");
    let op = ProjectionOperator::new(geometry)?;
    let (w, h) = (geometry.image_width, geometry.image_height);
    let n = w * h;

    let a_norm = 1.01 * operator_norm(&op, 30);
    if a_norm == 0.0 {
        return Ok(geometry.image_zeros());
    }
    let nu = a_norm / GRAD_NORM;
    let radius = tv_weight * geometry.pixel_size * geometry.pixel_size / nu;
    // sigma * tau * L^2 = 1, split so that the iterates are those of the
    // unit-pixel problem whatever the pixel size.
    let lipschitz = (2.0f64).sqrt() * a_norm;
    let sigma = geometry.pixel_size / lipschitz;
    let tau = 1.0 / (geometry.pixel_size * lipschitz);

    let p = sinogram.data();
    let mut x = vec![0.0; n];
    let mut x_bar = vec![0.0; n];
    let mut q = vec![0.0; geometry.n_rays()];
    let mut gx_dual = vec![0.0; n];
    let mut gy_dual = vec![0.0; n];
    let mut ax = vec![0.0; geometry.n_rays()];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut kt = vec![0.0; n];

    for _ in 0..iterations {
        op.forward_into(&x_bar, &mut ax);
        for ((qi, &axi), &pi) in q.iter_mut().zip(&ax).zip(p) {
            *qi = (*qi + sigma * (axi - pi)) / (1.0 + sigma);
        }
        gradient(&x_bar, w, h, &mut gx, &mut gy);
        for i in 0..n {
            let ux = gx_dual[i] + sigma * nu * gx[i];
            let uy = gy_dual[i] + sigma * nu * gy[i];
            let mag = (ux * ux + uy * uy).sqrt();
            let shrink = if mag > radius { radius / mag } else { 1.0 };
            gx_dual[i] = ux * shrink;
            gy_dual[i] = uy * shrink;
        }
        op.back_into(&q, &mut kt);
        gradient_adjoint_add(&gx_dual, &gy_dual, w, h, nu, &mut kt);
        for i in 0..n {
            let prev = x[i];
            let next = (prev - tau * kt[i]).max(0.0);
            x[i] = next;
            x_bar[i] = 2.0 * next - prev;
        }
    }
    Ok(Image::from_vec(w, h, x)?.with_pixel_size(geometry.pixel_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_parallel_geometry;

    #[test]
    fn gradient_adjoint_identity() {
        let (w, h) = (7, 5);
        let x: Vec<f64> = (0..w * h).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let ux: Vec<f64> = (0..w * h).map(|i| ((i * 13 % 7) as f64).cos()).collect();
        let uy: Vec<f64> = (0..w * h).map(|i| ((i * 5 % 9) as f64 * 0.3).sin()).collect();
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        gradient(&x, w, h, &mut gx, &mut gy);
        let lhs: f64 = gx.iter().zip(&ux).map(|(a, b)| a * b).sum::<f64>() + gy.iter().zip(&uy).map(|(a, b)| a * b).sum::<f64>();
        let mut adj = vec![0.0; w * h];
        gradient_adjoint_add(&ux, &uy, w, h, 1.0, &mut adj);
        let rhs: f64 = adj.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn tv_of_constant_is_zero_and_step_is_perimeter() {
        assert_eq!(total_variation(&Image::filled(8, 8, 0.3)), 0.0);
        let mut img = Image::zeros(8, 8);
        for r in 0..8 {
            for c in 4..8 {
                img.set(c, r, 1.0);
            }
        }
        assert!((total_variation(&img) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero_image() {
        let g = make_parallel_geometry(8, 24, 24).unwrap();
        let x = tvmin(&Sinogram::zeros(&g), &g, 20, 0.1).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = make_parallel_geometry(8, 24, 24).unwrap();
        assert!(tvmin(&Sinogram::zeros(&g), &g, 0, 0.1).is_err());
        assert!(tvmin(&Sinogram::zeros(&g), &g, 5, -1.0).is_err());
    }

    #[test]
    fn power_method_matches_rayleigh_bound() {
        let g = make_parallel_geometry(6, 16, 16).unwrap();
        let op = ProjectionOperator::new(&g).unwrap();
        let norm = operator_norm(&op, 50);
        // ||A 1|| / ||1|| is a lower bound for the spectral norm.
        let ones = g.image_ones();
        let a1 = op.forward(&ones).unwrap();
        let lower = a1.data().iter().map(|v| v * v).sum::<f64>().sqrt() / (g.n_pixels() as f64).sqrt();
        assert!(norm >= lower * (1.0 - 1e-9));
    }
}
