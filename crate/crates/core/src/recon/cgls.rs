use crate::error::{ensure, Result};
use crate::geometry::{Geometry, Image, Sinogram};
use crate::projector::ProjectionOperator;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients on `A^T A x = A^T p` from a zero start.
///
/// Returns the iterate and `||p - A x_k||` for `k = 0..=iterations`. Stops
/// early (keeping the current iterate) once the normal-equation residual
/// vanishes.
pub fn cgls_with_history(sinogram: &Sinogram, geometry: &Geometry, iterations: usize) -> Result<(Image, Vec<f64>)> {
    geometry.check_sinogram(sinogram)?;
    ensure!(iterations >= 1, "CGLS needs at least one iteration");
    let op = ProjectionOperator::new(geometry)?;

    let mut x = geometry.image_zeros();
    let mut r = sinogram.data().to_vec();
    let mut s = vec![0.0; geometry.n_pixels()];
    op.back_into(&r, &mut s);
    let mut d = s.clone();
    let mut q = vec![0.0; geometry.n_rays()];
    let mut gamma = dot(&s, &s);
    let mut history = vec![dot(&r, &r).sqrt()];

    for _ in 0..iterations {
        if gamma == 0.0 {
            break;
        }
        op.forward_into(&d, &mut q);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.data_mut().iter_mut().zip(&d).for_each(|(xi, di)| *xi += alpha * di);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        history.push(dot(&r, &r).sqrt());
        op.back_into(&r, &mut s);
        let gamma_next = dot(&s, &s);
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        d.iter_mut().zip(&s).for_each(|(di, si)| *di = si + beta * *di);
    }
    Ok((x, history))
}

pub fn cgls(sinogram: &Sinogram, geometry: &Geometry, iterations: usize) -> Result<Image> {
    Ok(cgls_with_history(sinogram, geometry, iterations)?.0)
}
