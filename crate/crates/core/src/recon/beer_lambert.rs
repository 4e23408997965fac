//! Conversions between line integrals and detected photon counts.

use crate::error::{ensure, Result};
use crate::geometry::Sinogram;

/// Expected detector counts `I0 * exp(-p)`.
pub fn transmit(p: &Sinogram, i0: f64) -> Result<Sinogram> {
    ensure!(i0 > 0.0 && i0.is_finite(), "source intensity must be positive, got {i0}");
    ensure!(p.data().iter().all(|v| v.is_finite()), "projection values must be finite");
    Ok(p.map(|v| i0 * (-v).exp()))
}

/// Line integrals `-ln(max(I, 1) / I0)` from detector counts.
///
/// Counts below one photon are clamped to one, so the result is finite.
pub fn log_normalize(counts: &Sinogram, i0: f64) -> Result<Sinogram> {
    ensure!(i0 > 0.0 && i0.is_finite(), "source intensity must be positive, got {i0}");
    ensure!(counts.data().iter().all(|v| *v >= 0.0 && v.is_finite()), "detector counts must be finite and non-negative");
    Ok(counts.map(|c| -(c.max(1.0) / i0).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_parallel_geometry;

    fn sino(values: &[f64]) -> Sinogram {
        let g = make_parallel_geometry(1, values.len(), 4).unwrap();
        Sinogram::from_vec(&g, values.to_vec()).unwrap()
    }

    #[test]
    fn transmit_values() {
        let out = transmit(&sino(&[0.0, 1.0]), 1000.0).unwrap();
        assert_eq!(out.data()[0], 1000.0);
        assert!((out.data()[1] - 367.879_441_171_442_3).abs() < 1e-9);
        assert!(transmit(&sino(&[0.0]), 0.0).is_err());
        assert!(transmit(&sino(&[0.0]), -5.0).is_err());
    }

    #[test]
    fn log_normalize_values() {
        let i0 = 1000.0;
        let out = log_normalize(&sino(&[i0, i0 / std::f64::consts::E, 0.0]), i0).unwrap();
        assert_eq!(out.data()[0], 0.0);
        assert!((out.data()[1] - 1.0).abs() < 1e-12);
        assert!((out.data()[2] - 1000f64.ln()).abs() < 1e-12);
        assert!(log_normalize(&sino(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn inverse_pair_without_clamping() {
        let values: Vec<f64> = (0..=600).map(|i| i as f64 / 100.0).collect();
        let p = sino(&values);
        for i0 in [1e3, 1e4, 5e4, 1e6] {
            let back = log_normalize(&transmit(&p, i0).unwrap(), i0).unwrap();
            for (a, b) in back.data().iter().zip(p.data()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b} at I0={i0}");
            }
        }
    }
}
