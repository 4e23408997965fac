// Oracles index explicitly to mirror the formulas.
#![allow(clippy::needless_range_loop)]

use ctstreak::gru::{
    conv_gru_backward, conv_gru_step, msd_gru_backward, msd_gru_forward, slice_patches, ConvGRUParams, GruVariant, MSDGRUWeights,
    PatchOrder,
};
use ctstreak::msd::{msd_backward, msd_forward, MSDConfig, MSDWeights};
use ctstreak::nn::{
    activation, activation_backward, dilated_conv2d, dilated_conv2d_backward, grad_check, mse_loss, uniform_init, Activation,
    ConvLayerParams, Parameterized, Tensor, DEFAULT_STEP,
};

const TOL: f64 = 1e-5;

fn rand(shape: &[usize], seed: u64) -> Tensor {
    uniform_init(shape, -1.0, 1.0, seed).unwrap()
}

// Scalar objective <f(x), g> for a fixed random projection g.
fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn random_conv(cin: usize, cout: usize, d: usize, seed: u64) -> ConvLayerParams {
    let mut p = ConvLayerParams::zeros(cin, cout, 3, d, true);
    p.kernel = rand(&[p.kernel.len()], seed).into_vec();
    p.bias = Some(rand(&[cout], seed + 1).into_vec());
    p
}

#[test]
fn dilated_conv_gradients() {
    for (cin, cout, d, h, w) in [(1, 1, 1, 4, 4), (2, 3, 2, 5, 6), (3, 2, 3, 7, 5)] {
        let x = rand(&[2, cin, h, w], 1);
        let p = random_conv(cin, cout, d, 2);
        let g = rand(&[2, cout, h, w], 3);
        let grads = dilated_conv2d_backward(&x, &p, &g).unwrap();

        let err = grad_check(
            |v| dot(&dilated_conv2d(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), &p).unwrap(), &g),
            x.data(),
            grads.input.data(),
            DEFAULT_STEP,
        );
        assert!(err < 1e-6, "input grad error {err}");

        let err = grad_check(
            |v| {
                let mut q = p.clone();
                q.kernel = v.to_vec();
                dot(&dilated_conv2d(&x, &q).unwrap(), &g)
            },
            &p.kernel,
            &grads.kernel,
            DEFAULT_STEP,
        );
        assert!(err < 1e-6, "kernel grad error {err}");

        let bias = grads.bias.unwrap();
        for co in 0..cout {
            let plane = h * w;
            let expected: f64 =
                (0..2).map(|s| g.data()[(s * cout + co) * plane..(s * cout + co + 1) * plane].iter().sum::<f64>()).sum();
            assert!((bias[co] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn activation_and_loss_gradients() {
    let x = rand(&[2, 1, 8, 8], 4);
    let g = rand(&[2, 1, 8, 8], 5);
    for kind in [Activation::Sigmoid, Activation::Tanh, Activation::Relu] {
        let ana = activation_backward(&x, kind, &g).unwrap();
        let err = grad_check(
            |v| dot(&activation(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), kind), &g),
            x.data(),
            ana.data(),
            DEFAULT_STEP,
        );
        assert!(err < TOL, "{kind}: {err}");
    }
    let t = rand(&[2, 1, 8, 8], 6);
    let (_, grad) = mse_loss(&x, &t).unwrap();
    let err = grad_check(
        |v| mse_loss(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), &t).unwrap().0,
        x.data(),
        grad.data(),
        DEFAULT_STEP,
    );
    assert!(err < 1e-6, "loss {err}");
}

fn random_gru(cin: usize, d: usize, seed: u64) -> ConvGRUParams {
    let mut p = ConvGRUParams::zeros(cin, 1, d);
    let flat = rand(&[p.num_parameters()], seed).into_vec();
    p.assign_flat(&flat).unwrap();
    p
}

#[test]
fn conv_gru_step_gradients() {
    for variant in [GruVariant::Standard, GruVariant::Literal] {
        let p = random_gru(2, 2, 7);
        let x = rand(&[2, 2, 5, 5], 8);
        let hp = rand(&[2, 1, 5, 5], 9);
        let g = rand(&[2, 1, 5, 5], 10);
        let (gx, gh, gp) = conv_gru_backward(&x, &hp, &p, variant, &g).unwrap();
        let f_x =
            |v: &[f64]| dot(&conv_gru_step(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), &hp, &p, variant).unwrap(), &g);
        assert!(grad_check(f_x, x.data(), gx.data(), DEFAULT_STEP) < TOL);
        let f_h =
            |v: &[f64]| dot(&conv_gru_step(&x, &Tensor::from_vec(hp.shape(), v.to_vec()).unwrap(), &p, variant).unwrap(), &g);
        assert!(grad_check(f_h, hp.data(), gh.data(), DEFAULT_STEP) < TOL);
        let f_p = |v: &[f64]| {
            let mut q = p.clone();
            q.assign_flat(v).unwrap();
            dot(&conv_gru_step(&x, &hp, &q, variant).unwrap(), &g)
        };
        let err = grad_check(f_p, &p.flatten(), &gp.flatten(), DEFAULT_STEP);
        assert!(err < TOL, "{variant} params {err}");
    }
}

#[test]
fn msd_gradients() {
    for layers in [2, 4] {
        let cfg = MSDConfig::new(layers, 3, 1).unwrap();
        let w = MSDWeights::init(&cfg, 11).unwrap();
        let mut w = w;
        let flat: Vec<f64> = w.flatten().iter().enumerate().map(|(i, v)| v + 0.01 * (i % 7) as f64).collect();
        w.assign_flat(&flat).unwrap();
        let x = uniform_init(&[2, 1, 8, 8], 0.0, 1.0, 12).unwrap();
        let g = rand(&[2, 1, 8, 8], 13);
        let (gx, gw) = msd_backward(&x, &w, &cfg, &g).unwrap();
        let f_x = |v: &[f64]| dot(&msd_forward(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), &w, &cfg).unwrap(), &g);
        let e = grad_check(f_x, x.data(), gx.data(), DEFAULT_STEP);
        assert!(e < TOL, "msd input {e}");
        let f_w = |v: &[f64]| {
            let mut q = w.clone();
            q.assign_flat(v).unwrap();
            dot(&msd_forward(&x, &q, &cfg).unwrap(), &g)
        };
        let e = grad_check(f_w, &w.flatten(), &gw.flatten(), DEFAULT_STEP);
        assert!(e < TOL, "msd weights {e}");
    }
}

#[test]
fn msd_gru_gradients() {
    for variant in [GruVariant::Standard, GruVariant::Literal] {
        let cfg = MSDConfig::new(2, 2, 1).unwrap();
        let w = MSDGRUWeights::init(&cfg, variant, 21).unwrap();
        let img = uniform_init(&[1, 1, 16, 16], 0.0, 1.0, 22).unwrap();
        let seq = slice_patches(&img, 8, 8, PatchOrder::Raster).unwrap();
        let g = rand(&[1, 4, 1, 8, 8], 23);
        let (gx, gw) = msd_gru_backward(&seq, &w, &cfg, &g).unwrap();
        let f_x = |v: &[f64]| {
            let s = seq.with_data(Tensor::from_vec(seq.data().shape(), v.to_vec()).unwrap()).unwrap();
            dot(msd_gru_forward(&s, &w, &cfg).unwrap().data(), &g)
        };
        let e = grad_check(f_x, seq.data().data(), gx.data(), DEFAULT_STEP);
        assert!(e < TOL, "{variant} input {e}");
        let f_w = |v: &[f64]| {
            let mut q = w.clone();
            q.assign_flat(v).unwrap();
            dot(msd_gru_forward(&seq, &q, &cfg).unwrap().data(), &g)
        };
        let e = grad_check(f_w, &w.flatten(), &gw.flatten(), DEFAULT_STEP);
        assert!(e < TOL, "{variant} weights {e}");
    }
}
