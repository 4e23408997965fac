//! Image quality metrics on `[0, 1]`-normalised images.

use crate::error::{ensure, Result};
use crate::geometry::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    ensure!(a.same_shape(b), "image sizes differ: {}x{} vs {}x{}", a.width(), a.height(), b.width(), b.height());
    Ok(())
}

pub fn mse_metric(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(peak^2 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    let mse = mse_metric(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Normalised 1D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

// Separable 'valid' filtering: output is (h - k + 1) x (w - k + 1).
fn filter_valid(data: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut horiz = vec![0.0; h * ow];
    for r in 0..h {
        let row = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            horiz[r * ow + c] = taps.iter().zip(&row[c..c + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..k).map(|i| taps[i] * horiz[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Window side used for an image: 11, or the largest odd size that fits.
pub fn ssim_window_size(width: usize, height: usize) -> usize {
    let fit = width.min(height);
    let fit = if fit.is_multiple_of(2) { fit - 1 } else { fit };
    SSIM_WINDOW.min(fit)
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// `K1 = 0.01`, `K2 = 0.03` and dynamic range 1, over valid window positions.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let (w, h) = (a.width(), a.height());
    let taps = gaussian_taps(ssim_window_size(w, h), SSIM_SIGMA);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;

    let x = a.data();
    let y = b.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(x, w, h, &taps);
    let mu_y = filter_valid(y, w, h, &taps);
    let e_xx = filter_valid(&xx, w, h, &taps);
    let e_yy = filter_valid(&yy, w, h, &taps);
    let e_xy = filter_valid(&xy, w, h, &taps);

    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = e_xx[i] - mx * mx;
        let vy = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cases() {
        let a = crate::phantom::shepp_logan(32).unwrap();
        assert_eq!(mse_metric(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn closed_forms() {
        let a = Image::filled(16, 16, 0.2);
        let b = Image::filled(16, 16, 0.3);
        assert!((mse_metric(&a, &b).unwrap() - 0.01).abs() < 1e-15);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn constant_images_ssim() {
        let a = Image::filled(24, 24, 0.5);
        let b = Image::filled(24, 24, 0.7);
        let c1 = 1e-4;
        let expected = (2.0 * 0.5 * 0.7 + c1) / (0.25 + 0.49 + c1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        assert!((got - 0.9460).abs() < 1e-4);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let a = Image::zeros(8, 8);
        let b = Image::zeros(8, 9);
        assert!(mse_metric(&a, &b).is_err());
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn small_images_shrink_the_window() {
        assert_eq!(ssim_window_size(64, 64), 11);
        assert_eq!(ssim_window_size(8, 9), 7);
        let a = Image::filled(8, 8, 0.4);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }
}
