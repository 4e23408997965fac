//! Acquisition geometry and the two array containers every stage passes around.
//!
//! Images are stored row-major with row 0 at the top. World coordinates put the
//! rotation axis at the image centre with `x` to the right and `y` upwards, so
//! pixel `(col, row)` sits at
//! `((col - (w-1)/2) * pixel_size, ((h-1)/2 - row) * pixel_size)`.
//! Detector `k` sits at offset `(k - (n_det-1)/2) * detector_spacing`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};

/// 2D field of attenuation coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixel_size: f64,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Image { width, height, pixel_size: 1.0, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(width >= 1 && height >= 1, "image dimensions must be positive, got {width}x{height}");
        ensure!(data.len() == width * height, "image data has {} values, expected {}", data.len(), width * height);
        ensure!(data.iter().all(|v| v.is_finite()), "image data contains non-finite values");
        Ok(Image { width, height, pixel_size: 1.0, data })
    }

    pub fn with_pixel_size(mut self, pixel_size: f64) -> Self {
        self.pixel_size = pixel_size;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image { data: self.data.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn clip(&self, lo: f64, hi: f64) -> Image {
        self.map(|v| v.clamp(lo, hi))
    }
}

/// Log-normalised projection values indexed by `[angle][detector]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    n_angles: usize,
    n_detectors: usize,
    angles: Vec<f64>,
    detector_spacing: f64,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(geometry: &Geometry) -> Self {
        Self::filled(geometry, 0.0)
    }

    pub fn filled(geometry: &Geometry, value: f64) -> Self {
        Sinogram {
            n_angles: geometry.n_angles,
            n_detectors: geometry.n_detectors,
            angles: geometry.angles(),
            detector_spacing: geometry.detector_spacing,
            data: vec![value; geometry.n_angles * geometry.n_detectors],
        }
    }

    /// Builds a sinogram laid out for `geometry` from row-major values.
    pub fn from_vec(geometry: &Geometry, data: Vec<f64>) -> Result<Self> {
        ensure!(
            data.len() == geometry.n_angles * geometry.n_detectors,
            "sinogram data has {} values, expected {}x{}",
            data.len(),
            geometry.n_angles,
            geometry.n_detectors
        );
        let mut sino = Sinogram::zeros(geometry);
        sino.data = data;
        Ok(sino)
    }

    /// General constructor with explicit angles.
    pub fn with_angles(angles: Vec<f64>, n_detectors: usize, detector_spacing: f64, data: Vec<f64>) -> Result<Self> {
        ensure!(!angles.is_empty() && n_detectors >= 1, "sinogram needs at least one angle and one detector");
        ensure!(angles.iter().all(|a| (0.0..PI).contains(a)), "sinogram angles must lie in [0, pi)");
        ensure!(angles.windows(2).all(|w| w[1] > w[0]), "sinogram angles must be strictly increasing");
        ensure!(
            data.len() == angles.len() * n_detectors,
            "sinogram data has {} values, expected {}x{}",
            data.len(),
            angles.len(),
            n_detectors
        );
        Ok(Sinogram { n_angles: angles.len(), n_detectors, angles, detector_spacing, data })
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, angle: usize) -> &[f64] {
        &self.data[angle * self.n_detectors..(angle + 1) * self.n_detectors]
    }

    pub fn row_mut(&mut self, angle: usize) -> &mut [f64] {
        &mut self.data[angle * self.n_detectors..(angle + 1) * self.n_detectors]
    }

    pub fn get(&self, angle: usize, detector: usize) -> f64 {
        self.data[angle * self.n_detectors + detector]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Sinogram {
        Sinogram { data: self.data.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// Returns a copy with the same layout and new values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Sinogram> {
        ensure!(data.len() == self.data.len(), "sinogram data length mismatch");
        Ok(Sinogram { data, ..self.clone() })
    }

    pub fn matches(&self, geometry: &Geometry) -> bool {
        self.n_angles == geometry.n_angles && self.n_detectors == geometry.n_detectors
    }
}

/// Parallel-beam acquisition: equiangular views over `[0, angular_span)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub n_angles: usize,
    pub angular_span: f64,
    pub n_detectors: usize,
    pub detector_spacing: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub pixel_size: f64,
}

impl Geometry {
    pub fn angle(&self, k: usize) -> f64 {
        k as f64 * self.angular_span / self.n_angles as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_angles).map(|k| self.angle(k)).collect()
    }

    pub fn n_rays(&self) -> usize {
        self.n_angles * self.n_detectors
    }

    pub fn n_pixels(&self) -> usize {
        self.image_width * self.image_height
    }

    /// Sets both pixel size and detector spacing, keeping detectors matched to pixels.
    pub fn with_scale(mut self, pixel_size: f64) -> Self {
        self.pixel_size = pixel_size;
        self.detector_spacing = pixel_size;
        self
    }

    pub fn image_zeros(&self) -> Image {
        Image::zeros(self.image_width, self.image_height).with_pixel_size(self.pixel_size)
    }

    pub fn image_ones(&self) -> Image {
        Image::filled(self.image_width, self.image_height, 1.0).with_pixel_size(self.pixel_size)
    }

    pub fn check_image(&self, image: &Image) -> Result<()> {
        ensure!(
            image.width() == self.image_width && image.height() == self.image_height,
            "image is {}x{}, geometry expects {}x{}",
            image.width(),
            image.height(),
            self.image_width,
            self.image_height
        );
        Ok(())
    }

    pub fn check_sinogram(&self, sino: &Sinogram) -> Result<()> {
        ensure!(
            sino.matches(self),
            "sinogram is {}x{}, geometry expects {}x{}",
            sino.n_angles(),
            sino.n_detectors(),
            self.n_angles,
            self.n_detectors
        );
        Ok(())
    }
}

/// Equiangular parallel-beam geometry over `[0, pi)` for a square image, with
/// unit pixels and unit detector spacing centred on the rotation axis.
pub fn make_parallel_geometry(n_angles: usize, n_detectors: usize, image_size: usize) -> Result<Geometry> {
    if n_angles == 0 || n_detectors == 0 || image_size == 0 {
        return invalid(format!(
            "geometry counts must be positive (angles={n_angles}, detectors={n_detectors}, size={image_size})"
        ));
    }
    Ok(Geometry {
        n_angles,
        angular_span: PI,
        n_detectors,
        detector_spacing: 1.0,
        image_width: image_size,
        image_height: image_size,
        pixel_size: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_views_step_nine_degrees() {
        let g = make_parallel_geometry(20, 512, 512).unwrap();
        let angles = g.angles();
        assert_eq!(angles.len(), 20);
        for (k, a) in angles.iter().enumerate() {
            assert!((a - (9.0 * k as f64).to_radians()).abs() < 1e-12);
        }
        assert!((angles[19].to_degrees() - 171.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_quarter_geometries() {
        let g = make_parallel_geometry(1, 1, 1).unwrap();
        assert_eq!(g.angles(), vec![0.0]);
        assert_eq!(g.n_detectors, 1);

        let g = make_parallel_geometry(4, 8, 8).unwrap();
        let expected = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
        for (a, e) in g.angles().iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
        assert_eq!(g.pixel_size, 1.0);
        assert_eq!(g.detector_spacing, 1.0);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(make_parallel_geometry(0, 8, 8).is_err());
        assert!(make_parallel_geometry(8, 0, 8).is_err());
        assert!(make_parallel_geometry(8, 8, 0).is_err());
    }

    #[test]
    fn angle_increments_are_uniform() {
        for n in [1usize, 2, 3, 7, 20, 180, 361] {
            let g = make_parallel_geometry(n, 4, 4).unwrap();
            let a = g.angles();
            for w in a.windows(2) {
                assert!((w[1] - w[0] - PI / n as f64).abs() < 1e-12);
            }
            assert!(*a.last().unwrap() < PI);
        }
    }

    #[test]
    fn image_constructor_validates() {
        assert!(Image::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::from_vec(2, 2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Image::from_vec(2, 2, vec![1.0; 4]).is_ok());
    }

    #[test]
    fn sinogram_angles_must_increase() {
        assert!(Sinogram::with_angles(vec![0.0, 0.0], 1, 1.0, vec![0.0; 2]).is_err());
        assert!(Sinogram::with_angles(vec![0.0, PI], 1, 1.0, vec![0.0; 2]).is_err());
        assert!(Sinogram::with_angles(vec![0.0, 1.0], 1, 1.0, vec![0.0; 2]).is_ok());
    }
}
