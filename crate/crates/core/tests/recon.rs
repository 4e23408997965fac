use ctstreak::geometry::{make_parallel_geometry, Geometry, Image, Sinogram};
use ctstreak::metrics::psnr;
use ctstreak::phantom::{random_ellipse_phantom, shepp_logan};
use ctstreak::projector::forward_project;
use ctstreak::recon::{cgls, fbp, reconstruct, sirt, total_variation, tvmin, Method, ReconConfig};
use nalgebra::{DMatrix, DVector};

// Column j of A is the projection of the j-th unit image.
fn dense_matrix(g: &Geometry) -> DMatrix<f64> {
    let n = g.n_pixels();
    let mut a = DMatrix::zeros(g.n_rays(), n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let img = Image::from_vec(g.image_width, g.image_height, e).unwrap();
        let col = forward_project(&img, g).unwrap();
        for (i, &v) in col.data().iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    a
}

// 3 views x 2 detectors over a 2x2 image.
fn tiny_system() -> (Geometry, DMatrix<f64>) {
    let mut g = make_parallel_geometry(3, 2, 2).unwrap();
    g.detector_spacing = 0.8;
    let a = dense_matrix(&g);
    (g, a)
}

#[test]
fn tiny_system_is_six_by_four_and_full_rank() {
    let (_, a) = tiny_system();
    assert_eq!(a.shape(), (6, 4));
    let sv = a.clone().svd(false, false).singular_values;
    assert!(sv.iter().all(|&s| s > 1e-3), "singular values {sv:?}");
}

#[test]
fn cgls_matches_dense_least_squares() {
    let (g, a) = tiny_system();
    let p = DVector::from_vec(vec![1.0, 2.0, 0.5, -0.3, 1.7, 0.9]);
    let expected = a.clone().svd(true, true).solve(&p, 1e-12).unwrap();
    let sino = Sinogram::from_vec(&g, p.as_slice().to_vec()).unwrap();
    // Four unknowns: exact after four steps up to rounding.
    let x = cgls(&sino, &g, 4).unwrap();
    for (got, want) in x.data().iter().zip(expected.iter()) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn sirt_recovers_a_consistent_full_rank_system() {
    let (g, a) = tiny_system();
    let truth = DVector::from_vec(vec![0.2, 0.9, 0.4, 0.6]);
    let p = &a * &truth;
    let sino = Sinogram::from_vec(&g, p.as_slice().to_vec()).unwrap();
    let x = sirt(&sino, &g, 3000, None).unwrap();
    for (got, want) in x.data().iter().zip(truth.iter()) {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn sirt_residual_decreases() {
    let g = make_parallel_geometry(20, 48, 48).unwrap();
    let p = forward_project(&shepp_logan(48).unwrap(), &g).unwrap();
    let solver = ctstreak::recon::Sirt::new(&g).unwrap();
    let (_, history) = solver.run(&p, 50, None).unwrap();
    for w in history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
}

#[test]
fn tvmin_does_not_depend_on_the_physical_scale() {
    let g = make_parallel_geometry(12, 32, 32).unwrap();
    let phantom = random_ellipse_phantom(32, 5, 4).unwrap();
    let unit = tvmin(&forward_project(&phantom, &g).unwrap(), &g, 60, 0.1).unwrap();
    let g2 = g.with_scale(2.0 / 32.0);
    let scaled = tvmin(&forward_project(&phantom, &g2).unwrap(), &g2, 60, 0.1).unwrap();
    for (a, b) in unit.data().iter().zip(scaled.data()) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn tvmin_output_is_nonnegative_and_smoother_with_more_weight() {
    let g = make_parallel_geometry(10, 32, 32).unwrap();
    let p = forward_project(&random_ellipse_phantom(32, 6, 2).unwrap(), &g).unwrap();
    let light = tvmin(&p, &g, 100, 0.01).unwrap();
    let heavy = tvmin(&p, &g, 100, 1.0).unwrap();
    assert!(light.data().iter().chain(heavy.data()).all(|&v| v >= 0.0));
    assert!(total_variation(&heavy) < total_variation(&light));
}

#[test]
fn fbp_with_many_views_approximates_the_object() {
    let size = 64;
    let g = make_parallel_geometry(180, size, size).unwrap();
    let phantom = shepp_logan(size).unwrap();
    let x = fbp(&forward_project(&phantom, &g).unwrap(), &g).unwrap();
    assert!(psnr(&x, &phantom, 1.0).unwrap() > 20.0);
}

#[test]
fn reconstruct_dispatches_to_each_method() {
    let g = make_parallel_geometry(8, 24, 24).unwrap();
    let p = forward_project(&random_ellipse_phantom(24, 3, 1).unwrap(), &g).unwrap();
    assert_eq!(reconstruct(&p, &g, &ReconConfig::new(Method::Fbp)).unwrap(), fbp(&p, &g).unwrap());
    assert_eq!(reconstruct(&p, &g, &ReconConfig::new(Method::Sirt).with_iterations(7)).unwrap(), sirt(&p, &g, 7, None).unwrap());
    assert_eq!(reconstruct(&p, &g, &ReconConfig::new(Method::Cgls).with_iterations(5)).unwrap(), cgls(&p, &g, 5).unwrap());
    assert_eq!(
        reconstruct(&p, &g, &ReconConfig::new(Method::Tvmin).with_iterations(9).with_tv_weight(0.3)).unwrap(),
        tvmin(&p, &g, 9, 0.3).unwrap()
    );
}
