// Oracles index explicitly to mirror the formulas.
#![allow(clippy::needless_range_loop)]

use ctstreak::geometry::Image;
use ctstreak::metrics::{mse_metric, psnr, ssim};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_vec(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn oracle_mse(a: &Image, b: &Image) -> f64 {
    let mut sum = 0.0;
    for r in 0..a.height() {
        for c in 0..a.width() {
            let d = a.get(c, r) - b.get(c, r);
            sum += d * d;
        }
    }
    sum / (a.width() * a.height()) as f64
}

// Full 2D window sums at every valid position, no separable filtering.
fn oracle_ssim(a: &Image, b: &Image) -> f64 {
    let k = 11usize.min(if a.width().min(a.height()).is_multiple_of(2) {
        a.width().min(a.height()) - 1
    } else {
        a.width().min(a.height())
    });
    let centre = (k as f64 - 1.0) / 2.0;
    let mut win = vec![vec![0.0; k]; k];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let r2 = (i as f64 - centre).powi(2) + (j as f64 - centre).powi(2);
            *v = (-r2 / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0usize;
    for y in 0..=a.height() - k {
        for x in 0..=a.width() - k {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let wt = win[i][j] / total;
                    let (p, q) = (a.get(x + j, y + i), b.get(x + j, y + i));
                    mx += wt * p;
                    my += wt * q;
                    sxx += wt * p * p;
                    syy += wt * q * q;
                    sxy += wt * p * q;
                }
            }
            let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

#[test]
fn identity_cases_are_exact() {
    let a = random_image(32, 24, 1);
    assert_eq!(mse_metric(&a, &a).unwrap(), 0.0);
    assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);
}

#[test]
fn constant_image_ssim_matches_closed_form() {
    let c1 = 1e-4;
    for (u, v) in [(0.5, 0.7), (0.1, 0.9), (0.0, 0.3), (0.42, 0.42)] {
        let got = ssim(&Image::filled(20, 20, u), &Image::filled(20, 20, v)).unwrap();
        let want = (2.0 * u * v + c1) / (u * u + v * v + c1);
        assert!((got - want).abs() < 1e-9, "({u}, {v}): {got} vs {want}");
    }
}

#[test]
fn metrics_match_scalar_loop_oracles() {
    for seed in 0..20u64 {
        let (w, h) = (16 + (seed as usize % 5) * 3, 16 + (seed as usize % 3) * 5);
        let a = random_image(w, h, seed);
        let b = random_image(w, h, seed + 1000);
        let mse = oracle_mse(&a, &b);
        assert!((mse_metric(&a, &b).unwrap() - mse).abs() < 1e-10);
        assert!((psnr(&a, &b, 1.0).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-10);
        assert!((ssim(&a, &b).unwrap() - oracle_ssim(&a, &b)).abs() < 1e-10);
    }
}

#[test]
fn small_images_use_the_largest_fitting_window() {
    let a = random_image(8, 9, 3);
    let b = random_image(8, 9, 4);
    assert!((ssim(&a, &b).unwrap() - oracle_ssim(&a, &b)).abs() < 1e-10);
}

#[test]
fn mismatched_shapes_are_rejected() {
    let a = Image::zeros(8, 8);
    let b = Image::zeros(8, 7);
    assert!(mse_metric(&a, &b).is_err());
    assert!(psnr(&a, &b, 1.0).is_err());
    assert!(ssim(&a, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ssim_is_symmetric_and_bounded(seed in any::<u64>(), w in 11usize..30, h in 11usize..30) {
        let a = random_image(w, h, seed);
        let b = random_image(w, h, seed ^ 0xff);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn psnr_decreases_as_error_grows(seed in any::<u64>(), d1 in 0.001f64..0.2, extra in 0.001f64..0.2) {
        let a = random_image(12, 12, seed);
        let b1 = a.map(|v| v + d1);
        let b2 = a.map(|v| v + d1 + extra);
        prop_assert!(mse_metric(&a, &b1).unwrap() >= 0.0);
        prop_assert!(psnr(&a, &b1, 1.0).unwrap() > psnr(&a, &b2, 1.0).unwrap());
    }
}
