//! Convolutional GRU cell.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::nn::{
    accumulate, conv_backward_sample, conv_forward_sample, sigmoid, ConvLayerParams, ParamSpec, Parameterized, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GruVariant {
    /// `h = (1 - z) h_prev + z tanh(Wh*x + Uh*(r h_prev) + bh)`.
    #[default]
    Standard,
    /// `h = (1 - z) h_prev + z tanh(Wh*x) + Uh*(r h_prev + bh)`.
    Literal,
}

impl GruVariant {
    pub fn name(self) -> &'static str {
        match self {
            GruVariant::Standard => "standard",
            GruVariant::Literal => "literal",
        }
    }
}

impl fmt::Display for GruVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GruVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(GruVariant::Standard),
            "literal" => Ok(GruVariant::Literal),
            other => Err(Error::InvalidArgument(format!("unknown GRU variant '{other}'"))),
        }
    }
}

/// Input-to-gate kernels `W*`, state-to-gate kernels `U*` (all bias-free,
/// 3x3, one dilation) and the gate biases `b*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGRUParams {
    pub wz: ConvLayerParams,
    pub wr: ConvLayerParams,
    pub wh: ConvLayerParams,
    pub uz: ConvLayerParams,
    pub ur: ConvLayerParams,
    pub uh: ConvLayerParams,
    pub bz: Vec<f64>,
    pub br: Vec<f64>,
    pub bh: Vec<f64>,
}

impl ConvGRUParams {
    pub fn zeros(in_channels: usize, hidden: usize, dilation: usize) -> Self {
        let w = || ConvLayerParams::zeros(in_channels, hidden, 3, dilation, false);
        let u = || ConvLayerParams::zeros(hidden, hidden, 3, dilation, false);
        ConvGRUParams {
            wz: w(),
            wr: w(),
            wh: w(),
            uz: u(),
            ur: u(),
            uh: u(),
            bz: vec![0.0; hidden],
            br: vec![0.0; hidden],
            bh: vec![0.0; hidden],
        }
    }

    pub fn in_channels(&self) -> usize {
        self.wz.in_channels
    }

    pub fn hidden(&self) -> usize {
        self.wz.out_channels
    }

    pub fn dilation(&self) -> usize {
        self.wz.dilation
    }

    pub fn validate(&self) -> Result<()> {
        let (c, hid, d) = (self.in_channels(), self.hidden(), self.dilation());
        for w in [&self.wz, &self.wr, &self.wh] {
            w.validate()?;
            ensure!(
                w.in_channels == c && w.out_channels == hid && w.kernel_size == 3 && w.dilation == d && w.bias.is_none(),
                "input-to-gate kernels must share shape {hid}x{c}x3x3 and dilation {d}"
            );
        }
        for u in [&self.uz, &self.ur, &self.uh] {
            u.validate()?;
            ensure!(
                u.in_channels == hid && u.out_channels == hid && u.kernel_size == 3 && u.dilation == d && u.bias.is_none(),
                "state-to-gate kernels must share shape {hid}x{hid}x3x3 and dilation {d}"
            );
        }
        ensure!(self.bz.len() == hid && self.br.len() == hid && self.bh.len() == hid, "gate biases must have {hid} entries");
        Ok(())
    }

    pub(crate) fn specs(&self, prefix: &str, out: &mut Vec<ParamSpec>) {
        for (n, p) in [("Wz", &self.wz), ("Uz", &self.uz), ("Wr", &self.wr), ("Ur", &self.ur), ("Wh", &self.wh), ("Uh", &self.uh)]
        {
            out.push(ParamSpec { name: format!("{prefix}.{n}.kernel"), shape: p.kernel_shape().to_vec() });
        }
        for n in ["bz", "br", "bh"] {
            out.push(ParamSpec { name: format!("{prefix}.{n}"), shape: vec![self.hidden()] });
        }
    }

    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        vec![
            &self.wz.kernel,
            &self.uz.kernel,
            &self.wr.kernel,
            &self.ur.kernel,
            &self.wh.kernel,
            &self.uh.kernel,
            &self.bz,
            &self.br,
            &self.bh,
        ]
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.wz.kernel,
            &mut self.uz.kernel,
            &mut self.wr.kernel,
            &mut self.ur.kernel,
            &mut self.wh.kernel,
            &mut self.uh.kernel,
            &mut self.bz,
            &mut self.br,
            &mut self.bh,
        ]
    }
}

impl Parameterized for ConvGRUParams {
    fn param_specs(&self) -> Vec<ParamSpec> {
        let mut v = Vec::new();
        self.specs("gru", &mut v);
        v
    }

    fn params(&self) -> Vec<&[f64]> {
        self.slices()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.slices_mut()
    }
}

// Gate activations of one step for one sample; `aux` is `r * h_prev` for the
// standard cell and `r * h_prev + bh` for the literal one.
pub(crate) struct StepTrace {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub aux: Vec<f64>,
}

fn add_bias(buf: &mut [f64], bias: &[f64], plane: usize) {
    for (ch, b) in bias.iter().enumerate() {
        buf[ch * plane..(ch + 1) * plane].iter_mut().for_each(|v| *v += b);
    }
}

pub(crate) fn step_forward(
    p: &ConvGRUParams,
    variant: GruVariant,
    x: &[f64],
    hp: &[f64],
    h: usize,
    w: usize,
    out: &mut [f64],
) -> StepTrace {
    let plane = h * w;
    let n = p.hidden() * plane;
    let mut z = vec![0.0; n];
    conv_forward_sample(&p.wz, x, h, w, &mut z, false);
    conv_forward_sample(&p.uz, hp, h, w, &mut z, true);
    add_bias(&mut z, &p.bz, plane);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = vec![0.0; n];
    conv_forward_sample(&p.wr, x, h, w, &mut r, false);
    conv_forward_sample(&p.ur, hp, h, w, &mut r, true);
    add_bias(&mut r, &p.br, plane);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut aux: Vec<f64> = r.iter().zip(hp).map(|(a, b)| a * b).collect();
    let mut c = vec![0.0; n];
    conv_forward_sample(&p.wh, x, h, w, &mut c, false);
    match variant {
        GruVariant::Standard => {
            conv_forward_sample(&p.uh, &aux, h, w, &mut c, true);
            add_bias(&mut c, &p.bh, plane);
            c.iter_mut().for_each(|v| *v = v.tanh());
            for i in 0..n {
                out[i] = (1.0 - z[i]) * hp[i] + z[i] * c[i];
            }
        }
        GruVariant::Literal => {
            c.iter_mut().for_each(|v| *v = v.tanh());
            add_bias(&mut aux, &p.bh, plane);
            conv_forward_sample(&p.uh, &aux, h, w, &mut out[..n], false);
            for i in 0..n {
                out[i] += (1.0 - z[i]) * hp[i] + z[i] * c[i];
            }
        }
    }
    StepTrace { z, r, c, aux }
}

/// Adds the step's input gradient into `gx`, its state gradient into `ghp`
/// and the parameter gradients into `grads`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_backward(
    p: &ConvGRUParams,
    variant: GruVariant,
    x: &[f64],
    hp: &[f64],
    t: &StepTrace,
    gh: &[f64],
    h: usize,
    w: usize,
    gx: &mut [f64],
    ghp: &mut [f64],
    grads: &mut ConvGRUParams,
) {
    let plane = h * w;
    let n = p.hidden() * plane;
    let mut gz = vec![0.0; n];
    let mut gc = vec![0.0; n];
    for i in 0..n {
        gz[i] = gh[i] * (t.c[i] - hp[i]);
        gc[i] = gh[i] * t.z[i] * (1.0 - t.c[i] * t.c[i]);
        ghp[i] += gh[i] * (1.0 - t.z[i]);
    }

    // Candidate branch.
    let mut g_aux = vec![0.0; n];
    conv_backward_sample(&p.wh, x, &gc, h, w, Some(gx), &mut grads.wh.kernel, None);
    let aux_upstream = match variant {
        GruVariant::Standard => {
            bias_sum(&gc, &mut grads.bh, plane);
            &gc
        }
        GruVariant::Literal => gh,
    };
    conv_backward_sample(&p.uh, &t.aux, aux_upstream, h, w, Some(&mut g_aux), &mut grads.uh.kernel, None);
    if variant == GruVariant::Literal {
        bias_sum(&g_aux, &mut grads.bh, plane);
    }
    let mut gr = vec![0.0; n];
    for i in 0..n {
        gr[i] = g_aux[i] * hp[i];
        ghp[i] += g_aux[i] * t.r[i];
    }

    // Gates.
    for i in 0..n {
        gz[i] *= t.z[i] * (1.0 - t.z[i]);
        gr[i] *= t.r[i] * (1.0 - t.r[i]);
    }
    conv_backward_sample(&p.wz, x, &gz, h, w, Some(gx), &mut grads.wz.kernel, None);
    conv_backward_sample(&p.uz, hp, &gz, h, w, Some(ghp), &mut grads.uz.kernel, None);
    bias_sum(&gz, &mut grads.bz, plane);
    conv_backward_sample(&p.wr, x, &gr, h, w, Some(gx), &mut grads.wr.kernel, None);
    conv_backward_sample(&p.ur, hp, &gr, h, w, Some(ghp), &mut grads.ur.kernel, None);
    bias_sum(&gr, &mut grads.br, plane);
}

fn bias_sum(g: &[f64], out: &mut [f64], plane: usize) {
    for (ch, o) in out.iter_mut().enumerate() {
        *o += g[ch * plane..(ch + 1) * plane].iter().sum::<f64>();
    }
}

fn check_step_shapes(x: &Tensor, h_prev: &Tensor, p: &ConvGRUParams) -> Result<(usize, usize, usize, usize)> {
    p.validate()?;
    let (n, c, h, w) = x.dims4()?;
    ensure!(c == p.in_channels(), "input has {c} channels, cell expects {}", p.in_channels());
    ensure!(
        h_prev.shape() == [n, p.hidden(), h, w],
        "state shape {:?} does not match [{n}, {}, {h}, {w}]",
        h_prev.shape(),
        p.hidden()
    );
    Ok((n, c, h, w))
}

pub fn conv_gru_step(x_t: &Tensor, h_prev: &Tensor, params: &ConvGRUParams, variant: GruVariant) -> Result<Tensor> {
    let (n, c, h, w) = check_step_shapes(x_t, h_prev, params)?;
    let hs = params.hidden() * h * w;
    let mut out = Tensor::zeros(h_prev.shape());
    out.data_mut().par_chunks_mut(hs).enumerate().for_each(|(s, o)| {
        let x = &x_t.data()[s * c * h * w..(s + 1) * c * h * w];
        let hp = &h_prev.data()[s * hs..(s + 1) * hs];
        step_forward(params, variant, x, hp, h, w, o);
    });
    debug_assert_eq!(out.shape()[0], n);
    Ok(out)
}

/// Gradients of one step: `(x_grad, h_prev_grad, param_grads)`.
pub fn conv_gru_backward(
    x_t: &Tensor,
    h_prev: &Tensor,
    params: &ConvGRUParams,
    variant: GruVariant,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, ConvGRUParams)> {
    let (n, c, h, w) = check_step_shapes(x_t, h_prev, params)?;
    ensure!(
        upstream.shape() == h_prev.shape(),
        "upstream shape {:?} does not match state {:?}",
        upstream.shape(),
        h_prev.shape()
    );
    let xs = c * h * w;
    let hs = params.hidden() * h * w;
    let per_sample: Vec<(Vec<f64>, Vec<f64>, ConvGRUParams)> = (0..n)
        .into_par_iter()
        .map(|s| {
            let x = &x_t.data()[s * xs..(s + 1) * xs];
            let hp = &h_prev.data()[s * hs..(s + 1) * hs];
            let mut scratch = vec![0.0; hs];
            let trace = step_forward(params, variant, x, hp, h, w, &mut scratch);
            let mut gx = vec![0.0; xs];
            let mut ghp = vec![0.0; hs];
            let mut g = ConvGRUParams::zeros(c, params.hidden(), params.dilation());
            step_backward(
                params,
                variant,
                x,
                hp,
                &trace,
                &upstream.data()[s * hs..(s + 1) * hs],
                h,
                w,
                &mut gx,
                &mut ghp,
                &mut g,
            );
            (gx, ghp, g)
        })
        .collect();
    let mut grads = ConvGRUParams::zeros(c, params.hidden(), params.dilation());
    let mut gx_all = Vec::with_capacity(n * xs);
    let mut gh_all = Vec::with_capacity(n * hs);
    for (gx, ghp, g) in per_sample {
        gx_all.extend_from_slice(&gx);
        gh_all.extend_from_slice(&ghp);
        accumulate(&mut grads, &g);
    }
    Ok((Tensor::from_vec(x_t.shape(), gx_all)?, Tensor::from_vec(h_prev.shape(), gh_all)?, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::uniform_init;

    #[test]
    fn zero_weights_halve_the_state() {
        let p = ConvGRUParams::zeros(2, 1, 1);
        let x = uniform_init(&[1, 2, 4, 4], -1.0, 1.0, 1).unwrap();
        let hp = uniform_init(&[1, 1, 4, 4], -1.0, 1.0, 2).unwrap();
        let h = conv_gru_step(&x, &hp, &p, GruVariant::Standard).unwrap();
        for (a, b) in h.data().iter().zip(hp.data()) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        for v in [GruVariant::Standard, GruVariant::Literal] {
            let h0 = conv_gru_step(&x, &Tensor::zeros(&[1, 1, 4, 4]), &p, v).unwrap();
            assert!(h0.data().iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn shape_errors() {
        let p = ConvGRUParams::zeros(1, 1, 2);
        assert!(conv_gru_step(&Tensor::zeros(&[1, 2, 4, 4]), &Tensor::zeros(&[1, 1, 4, 4]), &p, GruVariant::Standard).is_err());
        assert!(conv_gru_step(&Tensor::zeros(&[1, 1, 4, 4]), &Tensor::zeros(&[1, 1, 4, 5]), &p, GruVariant::Standard).is_err());
    }

    #[test]
    fn variant_names_parse() {
        for v in [GruVariant::Standard, GruVariant::Literal] {
            assert_eq!(v.name().parse::<GruVariant>().unwrap(), v);
        }
    }
}
