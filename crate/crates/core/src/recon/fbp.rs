//! Filtered backprojection with a Ram-Lak (|q|) filter applied in the
//! Fourier domain.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::geometry::{Geometry, Image, Sinogram};
use crate::projector::ProjectionOperator;

/// Padded transform length: next power of two at or above `2 * n_detectors`.
pub fn padded_len(n_detectors: usize) -> usize {
    (2 * n_detectors).next_power_of_two()
}

/// Ramp response `|q|` sampled on the padded DFT grid, in cycles per unit length.
pub fn ram_lak_response(padded: usize, detector_spacing: f64) -> Vec<f64> {
    let scale = 1.0 / (padded as f64 * detector_spacing);
    (0..padded)
        .map(|k| {
            let k = if k <= padded / 2 { k } else { padded - k };
            k as f64 * scale
        })
        .collect()
}

struct RampFilter {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    response: Vec<f64>,
}

impl RampFilter {
    fn new(n_detectors: usize, detector_spacing: f64) -> Self {
        let padded = padded_len(n_detectors);
        let mut planner = FftPlanner::new();
        RampFilter {
            forward: planner.plan_fft_forward(padded),
            inverse: planner.plan_fft_inverse(padded),
            response: ram_lak_response(padded, detector_spacing),
        }
    }

    /// Filters one projection row and returns the whole padded result.
    fn apply_padded(&self, row: &[f64]) -> Vec<f64> {
        let n = self.response.len();
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for (b, &v) in buf.iter_mut().zip(row) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, &h) in buf.iter_mut().zip(&self.response) {
            *b *= h;
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }
}

/// Ramp-filters every projection row independently.
pub fn ramp_filter(sinogram: &Sinogram) -> Sinogram {
    let filter = RampFilter::new(sinogram.n_detectors(), sinogram.detector_spacing());
    let mut out = sinogram.clone();
    for a in 0..sinogram.n_angles() {
        let filtered = filter.apply_padded(sinogram.row(a));
        out.row_mut(a).copy_from_slice(&filtered[..sinogram.n_detectors()]);
    }
    out
}

pub fn fbp(sinogram: &Sinogram, geometry: &Geometry) -> Result<Image> {
    geometry.check_sinogram(sinogram)?;
    let op = ProjectionOperator::new(geometry)?;
    let filtered = ramp_filter(sinogram);
    let mut img = op.back(&filtered)?;
    // The adjoint's per-view weights sum to pixel_size^2 / detector_spacing;
    // normalise them to interpolation weights, then apply the d(theta) step.
    let dtheta = geometry.angular_span / geometry.n_angles as f64;
    let scale = dtheta * geometry.detector_spacing / (geometry.pixel_size * geometry.pixel_size);
    img.data_mut().iter_mut().for_each(|v| *v *= scale);
    Ok(img)
}
