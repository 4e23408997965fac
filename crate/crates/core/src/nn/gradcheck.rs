//! Finite-difference gradient verification.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DEFAULT_STEP: f64 = 1e-5;

/// `max_i |a_i - n_i| / max(|a|_inf, |n|_inf)`: the worst coordinate error
/// relative to the gradient's scale, so tiny components do not dominate.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(1e-12, f64::max);
    diff / scale
}

/// Central differences on every coordinate with step `h * max(1, |theta_i|)`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            let step = h * orig.abs().max(1.0);
            x[i] = orig + step;
            let fp = f(&x);
            x[i] = orig - step;
            let fm = f(&x);
            x[i] = orig;
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Compares `analytic` against central differences of `f` at `point`.
pub fn grad_check(f: impl FnMut(&[f64]) -> f64, point: &[f64], analytic: &[f64], h: f64) -> f64 {
    assert_eq!(point.len(), analytic.len(), "gradient length must match the point");
    relative_error(analytic, &numeric_gradient(f, point, h))
}

/// Directional variant for large parameter vectors: compares `analytic . u`
/// with `(f(x + h u) - f(x - h u)) / 2h` along `n_dirs` random unit
/// directions and returns the worst relative disagreement.
pub fn grad_check_directional(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    h: f64,
    n_dirs: usize,
    seed: u64,
) -> f64 {
    assert_eq!(point.len(), analytic.len(), "gradient length must match the point");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_dirs {
        let mut u: Vec<f64> = (0..point.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        u.iter_mut().for_each(|v| *v /= norm);
        let xp: Vec<f64> = point.iter().zip(&u).map(|(x, d)| x + h * d).collect();
        let xm: Vec<f64> = point.iter().zip(&u).map(|(x, d)| x - h * d).collect();
        let num = (f(&xp) - f(&xm)) / (2.0 * h);
        let ana: f64 = analytic.iter().zip(&u).map(|(a, d)| a * d).sum();
        let scale = num.abs().max(ana.abs()).max(1e-12);
        worst = worst.max((num - ana).abs() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(x: &[f64]) -> f64 {
        x[0] * x[0] * x[1] + x[1].sin() + 3.0 * x[2]
    }

    fn df(x: &[f64]) -> Vec<f64> {
        vec![2.0 * x[0] * x[1], x[0] * x[0] + x[1].cos(), 3.0]
    }

    #[test]
    fn accepts_correct_gradient() {
        let p = [0.7, -1.3, 20.0];
        assert!(grad_check(f, &p, &df(&p), DEFAULT_STEP) < 1e-8);
        assert!(grad_check_directional(f, &p, &df(&p), DEFAULT_STEP, 8, 1) < 1e-6);
    }

    #[test]
    fn rejects_wrong_gradient() {
        let p = [0.7, -1.3, 20.0];
        let mut g = df(&p);
        g[1] += 0.1;
        assert!(grad_check(f, &p, &g, DEFAULT_STEP) > 1e-3);
        assert!(grad_check_directional(f, &p, &g, DEFAULT_STEP, 8, 1) > 1e-3);
    }
}
