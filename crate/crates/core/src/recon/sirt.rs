use crate::error::{ensure, Result};
use crate::geometry::{Geometry, Image, Sinogram};
use crate::projector::ProjectionOperator;

/// Weight sums below this are treated as rays/pixels outside the system.
pub const WEIGHT_EPS: f64 = 1e-12;

fn guarded_inverse(v: f64) -> f64 {
    if v < WEIGHT_EPS {
        0.0
    } else {
        1.0 / v
    }
}

/// Simultaneous iterative reconstruction:
/// `x <- x + C A^T R (p - A x)` with `C = 1/col_sums`, `R = 1/row_sums`.
pub struct Sirt {
    op: ProjectionOperator,
    inv_row: Vec<f64>,
    inv_col: Vec<f64>,
}

impl Sirt {
    pub fn new(geometry: &Geometry) -> Result<Self> {
        let op = ProjectionOperator::new(geometry)?;
        let inv_row = op.row_sums().data().iter().map(|&v| guarded_inverse(v)).collect();
        let inv_col = op.col_sums().data().iter().map(|&v| guarded_inverse(v)).collect();
        Ok(Sirt { op, inv_row, inv_col })
    }

    /// Applies one update in place and returns `||p - A x||` measured before it.
    pub fn step(&self, x: &mut [f64], p: &[f64], residual: &mut [f64], correction: &mut [f64]) -> f64 {
        self.op.forward_into(x, residual);
        let mut norm2 = 0.0;
        for ((r, &pi), &w) in residual.iter_mut().zip(p).zip(&self.inv_row) {
            let diff = pi - *r;
            norm2 += diff * diff;
            *r = diff * w;
        }
        self.op.back_into(residual, correction);
        for ((xj, &c), &w) in x.iter_mut().zip(correction.iter()).zip(&self.inv_col) {
            *xj += c * w;
        }
        norm2.sqrt()
    }

    /// Runs `iterations` updates and returns the image plus the residual norm
    /// before each update.
    pub fn run(&self, sinogram: &Sinogram, iterations: usize, initial: Option<&Image>) -> Result<(Image, Vec<f64>)> {
        let g = self.op.geometry();
        g.check_sinogram(sinogram)?;
        ensure!(iterations >= 1, "SIRT needs at least one iteration");
        let mut x = match initial {
            Some(img) => {
                g.check_image(img)?;
                img.clone().with_pixel_size(g.pixel_size)
            }
            None => g.image_zeros(),
        };
        let mut residual = vec![0.0; g.n_rays()];
        let mut correction = vec![0.0; g.n_pixels()];
        let mut history = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            history.push(self.step(x.data_mut(), sinogram.data(), &mut residual, &mut correction));
        }
        Ok((x, history))
    }
}

pub fn sirt(sinogram: &Sinogram, geometry: &Geometry, iterations: usize, initial: Option<&Image>) -> Result<Image> {
    Ok(Sirt::new(geometry)?.run(sinogram, iterations, initial)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_parallel_geometry;

    #[test]
    fn scalar_system_hand_case() {
        let g = make_parallel_geometry(1, 1, 1).unwrap();
        let p = Sinogram::from_vec(&g, vec![5.0]).unwrap();
        let x = sirt(&p, &g, 1, None).unwrap();
        assert_eq!(x.data(), &[5.0]);
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let g = make_parallel_geometry(6, 16, 16).unwrap();
        let solver = Sirt::new(&g).unwrap();
        let (x, hist) = solver.run(&Sinogram::zeros(&g), 10, None).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.0));
        assert!(hist.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn rejects_zero_iterations_and_bad_dims() {
        let g = make_parallel_geometry(6, 16, 16).unwrap();
        assert!(sirt(&Sinogram::zeros(&g), &g, 0, None).is_err());
        let other = make_parallel_geometry(7, 16, 16).unwrap();
        assert!(sirt(&Sinogram::zeros(&other), &g, 3, None).is_err());
    }

    #[test]
    fn applies_exactly_the_requested_number_of_updates() {
        let g = make_parallel_geometry(4, 12, 8).unwrap();
        let p = Sinogram::filled(&g, 1.0);
        let solver = Sirt::new(&g).unwrap();
        let (three, hist) = solver.run(&p, 3, None).unwrap();
        assert_eq!(hist.len(), 3);
        let (two, _) = solver.run(&p, 2, None).unwrap();
        let (one_more, _) = solver.run(&p, 1, Some(&two)).unwrap();
        assert_eq!(three, one_more);
    }
}
