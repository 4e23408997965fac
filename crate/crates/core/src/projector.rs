//! Parallel-beam forward projection with linear interpolation (Joseph's
//! method) and its exact adjoint.
//!
//! A ray steps one pixel row (or column, whichever axis it is closer to) at a
//! time and linearly interpolates between the two pixels it straddles on that
//! row. The interpolation weights scaled by the step length are the system
//! matrix entries `w_ij`; the matrix itself is never stored.
//!
//! Forward projection is parallel over views. Backprojection is parallel
//! over image rows for row-traversed views and over columns for the others,
//! so no two workers ever write the same pixel and results do not depend on
//! the thread count.

use rayon::prelude::*;

use crate::error::{ensure, Result};
use crate::geometry::{Geometry, Image, Sinogram};

#[derive(Debug, Clone, Copy)]
struct View {
    /// True when the ray is closer to the image's vertical axis and is
    /// traversed row by row.
    by_rows: bool,
    /// Path length per traversed row/column.
    step: f64,
    // The crossing position along the traversed line is affine:
    // `c0 + k * ck + line * cl` for detector `k` and row/column `line`.
    c0: f64,
    ck: f64,
    cl: f64,
}

/// Implicit system matrix for one geometry.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    geometry: Geometry,
    views: Vec<View>,
}

impl ProjectionOperator {
    pub fn new(geometry: &Geometry) -> Result<Self> {
        ensure!(geometry.n_angles >= 1 && geometry.n_detectors >= 1, "geometry needs angles and detectors");
        ensure!(geometry.image_width >= 1 && geometry.image_height >= 1, "geometry needs a non-empty image");
        ensure!(geometry.pixel_size > 0.0 && geometry.detector_spacing > 0.0, "pixel size and detector spacing must be positive");
        let views = geometry
            .angles()
            .into_iter()
            .map(|theta| {
                let (sin, cos) = theta.sin_cos();
                let by_rows = cos.abs() >= sin.abs();
                let step = geometry.pixel_size / if by_rows { cos.abs() } else { sin.abs() };
                let (ps, ds) = (geometry.pixel_size, geometry.detector_spacing);
                let half_d = (geometry.n_detectors as f64 - 1.0) / 2.0;
                let half_w = (geometry.image_width as f64 - 1.0) / 2.0;
                let half_h = (geometry.image_height as f64 - 1.0) / 2.0;
                let (c0, ck, cl) = if by_rows {
                    let ck = ds / (cos * ps);
                    let cl = sin / cos;
                    (half_w - half_d * ck - half_h * cl, ck, cl)
                } else {
                    let ck = -ds / (sin * ps);
                    let cl = cos / sin;
                    (half_h - half_d * ck - half_w * cl, ck, cl)
                };
                View { by_rows, step, c0, ck, cl }
            })
            .collect();
        Ok(ProjectionOperator { geometry: *geometry, views })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Continuous column index where ray `k` crosses the centre line of
    /// `row` (row-traversed views), or continuous row index where it
    /// crosses the centre line of column `row` (column-traversed views).
    #[inline(always)]
    fn crossing(v: &View, k: usize, line: usize) -> f64 {
        v.c0 + k as f64 * v.ck + line as f64 * v.cl
    }

    fn project_ray(&self, v: &View, k: usize, x: &[f64]) -> f64 {
        let w = self.geometry.image_width;
        let h = self.geometry.image_height;
        let mut acc = 0.0;
        if v.by_rows {
            for row in 0..h {
                let xf = Self::crossing(v, k, row);
                if xf <= -1.0 || xf >= w as f64 {
                    continue;
                }
                let i0 = xf.floor();
                let f = xf - i0;
                let i0 = i0 as isize;
                let base = row * w;
                if i0 >= 0 {
                    acc += (1.0 - f) * x[base + i0 as usize];
                }
                if i0 + 1 < w as isize {
                    acc += f * x[base + (i0 + 1) as usize];
                }
            }
        } else {
            for col in 0..w {
                let yf = Self::crossing(v, k, col);
                if yf <= -1.0 || yf >= h as f64 {
                    continue;
                }
                let j0 = yf.floor();
                let f = yf - j0;
                let j0 = j0 as isize;
                if j0 >= 0 {
                    acc += (1.0 - f) * x[j0 as usize * w + col];
                }
                if j0 + 1 < h as isize {
                    acc += f * x[(j0 + 1) as usize * w + col];
                }
            }
        }
        acc * v.step
    }

    /// `out = A x` on raw row-major buffers.
    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.geometry.n_detectors;
        debug_assert_eq!(x.len(), self.geometry.n_pixels());
        debug_assert_eq!(out.len(), self.geometry.n_rays());
        out.par_chunks_mut(d).zip(self.views.par_iter()).for_each(|(row, v)| {
            for (k, o) in row.iter_mut().enumerate() {
                *o = self.project_ray(v, k, x);
            }
        });
    }

    /// `out = A^T y` on raw row-major buffers.
    pub fn back_into(&self, y: &[f64], out: &mut [f64]) {
        let (w, h, d) = (self.geometry.image_width, self.geometry.image_height, self.geometry.n_detectors);
        debug_assert_eq!(y.len(), self.geometry.n_rays());
        debug_assert_eq!(out.len(), self.geometry.n_pixels());
        out.par_chunks_mut(w).enumerate().for_each(|(row, out_row)| {
            out_row.fill(0.0);
            for (a, v) in self.views.iter().enumerate().filter(|(_, v)| v.by_rows) {
                Self::scatter_line(v, row, &y[a * d..(a + 1) * d], out_row);
            }
        });
        if self.views.iter().all(|v| v.by_rows) {
            return;
        }
        // Column-traversed views fill a transposed buffer column by column.
        let mut cols = vec![0.0; w * h];
        cols.par_chunks_mut(h).enumerate().for_each(|(col, out_col)| {
            for (a, v) in self.views.iter().enumerate().filter(|(_, v)| !v.by_rows) {
                Self::scatter_line(v, col, &y[a * d..(a + 1) * d], out_col);
            }
        });
        out.par_chunks_mut(w).enumerate().for_each(|(row, out_row)| {
            for (col, o) in out_row.iter_mut().enumerate() {
                *o += cols[col * h + row];
            }
        });
    }

    // Every ray of the view crosses this row (or column) exactly once and
    // deposits onto the two pixels it straddles.
    fn scatter_line(v: &View, line: usize, rays: &[f64], out: &mut [f64]) {
        let n = out.len() as isize;
        for (k, &yk) in rays.iter().enumerate() {
            if yk == 0.0 {
                continue;
            }
            let pos = Self::crossing(v, k, line);
            if pos <= -1.0 || pos >= n as f64 {
                continue;
            }
            let i0 = pos.floor();
            let f = pos - i0;
            let i0 = i0 as isize;
            let val = yk * v.step;
            if i0 >= 0 {
                out[i0 as usize] += (1.0 - f) * val;
            }
            if i0 + 1 < n {
                out[(i0 + 1) as usize] += f * val;
            }
        }
    }

    pub fn forward(&self, image: &Image) -> Result<Sinogram> {
        self.geometry.check_image(image)?;
        let mut sino = Sinogram::zeros(&self.geometry);
        self.forward_into(image.data(), sino.data_mut());
        Ok(sino)
    }

    pub fn back(&self, sino: &Sinogram) -> Result<Image> {
        self.geometry.check_sinogram(sino)?;
        let mut img = self.geometry.image_zeros();
        self.back_into(sino.data(), img.data_mut());
        Ok(img)
    }

    /// `sum_j w_ij` for every ray.
    pub fn row_sums(&self) -> Sinogram {
        let ones = self.geometry.image_ones();
        let mut sino = Sinogram::zeros(&self.geometry);
        self.forward_into(ones.data(), sino.data_mut());
        sino
    }

    /// `sum_i w_ij` for every pixel.
    pub fn col_sums(&self) -> Image {
        let ones = vec![1.0; self.geometry.n_rays()];
        let mut img = self.geometry.image_zeros();
        self.back_into(&ones, img.data_mut());
        img
    }
}

pub fn forward_project(image: &Image, geometry: &Geometry) -> Result<Sinogram> {
    ProjectionOperator::new(geometry)?.forward(image)
}

pub fn back_project(sinogram: &Sinogram, geometry: &Geometry) -> Result<Image> {
    ProjectionOperator::new(geometry)?.back(sinogram)
}

pub fn row_sums(geometry: &Geometry) -> Result<Sinogram> {
    Ok(ProjectionOperator::new(geometry)?.row_sums())
}

pub fn col_sums(geometry: &Geometry) -> Result<Image> {
    Ok(ProjectionOperator::new(geometry)?.col_sums())
}
