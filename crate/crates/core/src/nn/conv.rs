//! Same-size 2D convolution (cross-correlation) with dilated kernels.
//!
//! Tap `(ky, kx)` of a `k x k` kernel reads the input at offset
//! `((ky - k/2) * d, (kx - k/2) * d)`; out-of-range reads are zero, which is
//! the same as zero padding by `d` on every side for 3x3 kernels.

use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    /// `out x in x k x k`, row-major.
    pub kernel: Vec<f64>,
    /// Per output channel; `None` for bias-free convolutions.
    pub bias: Option<Vec<f64>>,
}

impl ConvLayerParams {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, dilation: usize, with_bias: bool) -> Self {
        ConvLayerParams {
            in_channels,
            out_channels,
            kernel_size,
            dilation,
            kernel: vec![0.0; out_channels * in_channels * kernel_size * kernel_size],
            bias: with_bias.then(|| vec![0.0; out_channels]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.kernel_size == 3 || self.kernel_size == 1,
            "kernel size must be 3 (or 1 for output layers), got {}",
            self.kernel_size
        );
        ensure!(self.dilation >= 1, "dilation must be at least 1");
        ensure!(self.in_channels >= 1 && self.out_channels >= 1, "channel counts must be positive");
        ensure!(
            self.kernel.len() == self.out_channels * self.in_channels * self.kernel_size * self.kernel_size,
            "kernel holds {} weights, expected {}x{}x{}x{}",
            self.kernel.len(),
            self.out_channels,
            self.in_channels,
            self.kernel_size,
            self.kernel_size
        );
        if let Some(b) = &self.bias {
            ensure!(b.len() == self.out_channels, "bias has {} entries, expected {}", b.len(), self.out_channels);
        }
        Ok(())
    }

    pub fn kernel_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_size, self.kernel_size]
    }

    #[inline]
    fn weight(&self, co: usize, ci: usize, ky: usize, kx: usize) -> f64 {
        let k = self.kernel_size;
        self.kernel[((co * self.in_channels + ci) * k + ky) * k + kx]
    }

    #[inline]
    fn offset(&self, tap: usize) -> isize {
        (tap as isize - (self.kernel_size / 2) as isize) * self.dilation as isize
    }
}

// Output rows/cols whose shifted read `o + off` stays inside `[0, len)`.
#[inline]
fn valid_range(len: usize, off: isize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (len as isize - off.max(0)).max(0) as usize;
    (lo.min(len), hi.max(lo.min(len)))
}

/// Single-sample forward pass. `input` holds at least `in_channels` planes of
/// `h * w`; only the first `in_channels` are read. `out` receives
/// `out_channels` planes, overwritten unless `accumulate`.
pub fn conv_forward_sample(p: &ConvLayerParams, input: &[f64], h: usize, w: usize, out: &mut [f64], accumulate: bool) {
    let plane = h * w;
    let k = p.kernel_size;
    for co in 0..p.out_channels {
        let o = &mut out[co * plane..(co + 1) * plane];
        if !accumulate {
            o.fill(p.bias.as_ref().map_or(0.0, |b| b[co]));
        } else if let Some(b) = &p.bias {
            o.iter_mut().for_each(|v| *v += b[co]);
        }
        for ci in 0..p.in_channels {
            let inp = &input[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let dy = p.offset(ky);
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..k {
                    let wgt = p.weight(co, ci, ky, kx);
                    if wgt == 0.0 {
                        continue;
                    }
                    let dx = p.offset(kx);
                    let (x0, x1) = valid_range(w, dx);
                    if x0 == x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let src_row = ((y as isize + dy) as usize) * w;
                        let src =
                            &inp[(src_row as isize + x0 as isize + dx) as usize..(src_row as isize + x1 as isize + dx) as usize];
                        let dst = &mut o[y * w + x0..y * w + x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wgt * s;
                        }
                    }
                }
            }
        }
    }
}

/// Single-sample backward pass.
///
/// Adds into `input_grad` (same layout as the forward `input`, first
/// `in_channels` planes), `kernel_grad` and `bias_grad`.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward_sample(
    p: &ConvLayerParams,
    input: &[f64],
    upstream: &[f64],
    h: usize,
    w: usize,
    input_grad: Option<&mut [f64]>,
    kernel_grad: &mut [f64],
    bias_grad: Option<&mut [f64]>,
) {
    let plane = h * w;
    let k = p.kernel_size;
    if let Some(bg) = bias_grad {
        for co in 0..p.out_channels {
            bg[co] += upstream[co * plane..(co + 1) * plane].iter().sum::<f64>();
        }
    }
    let mut input_grad = input_grad;
    for co in 0..p.out_channels {
        let g = &upstream[co * plane..(co + 1) * plane];
        for ci in 0..p.in_channels {
            let inp = &input[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let dy = p.offset(ky);
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..k {
                    let dx = p.offset(kx);
                    let (x0, x1) = valid_range(w, dx);
                    if x0 == x1 {
                        continue;
                    }
                    let wgt = p.weight(co, ci, ky, kx);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let src_start = (((y as isize + dy) as usize * w) as isize + x0 as isize + dx) as usize;
                        let len = x1 - x0;
                        let gs = &g[y * w + x0..y * w + x1];
                        let src = &inp[src_start..src_start + len];
                        acc += gs.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(ig) = input_grad.as_deref_mut() {
                            if wgt != 0.0 {
                                let dst = &mut ig[ci * plane + src_start..ci * plane + src_start + len];
                                for (d, s) in dst.iter_mut().zip(gs) {
                                    *d += wgt * s;
                                }
                            }
                        }
                    }
                    kernel_grad[((co * p.in_channels + ci) * k + ky) * k + kx] += acc;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

pub fn dilated_conv2d(input: &Tensor, params: &ConvLayerParams) -> Result<Tensor> {
    params.validate()?;
    let (n, c, h, w) = input.dims4()?;
    ensure!(c == params.in_channels, "input has {c} channels, layer expects {}", params.in_channels);
    ensure!(h >= 1 && w >= 1, "input must be non-empty");
    let mut out = Tensor::zeros(&[n, params.out_channels, h, w]);
    let in_stride = c * h * w;
    let out_stride = params.out_channels * h * w;
    out.data_mut().par_chunks_mut(out_stride).enumerate().for_each(|(s, o)| {
        conv_forward_sample(params, &input.data()[s * in_stride..(s + 1) * in_stride], h, w, o, false);
    });
    Ok(out)
}

pub fn dilated_conv2d_backward(input: &Tensor, params: &ConvLayerParams, upstream: &Tensor) -> Result<ConvGrads> {
    params.validate()?;
    let (n, c, h, w) = input.dims4()?;
    ensure!(c == params.in_channels, "input has {c} channels, layer expects {}", params.in_channels);
    ensure!(
        upstream.shape() == [n, params.out_channels, h, w],
        "upstream gradient shape {:?} does not match output [{n}, {}, {h}, {w}]",
        upstream.shape(),
        params.out_channels
    );
    let in_stride = c * h * w;
    let out_stride = params.out_channels * h * w;
    let mut input_grad = Tensor::zeros(input.shape());
    let per_sample: Vec<(Vec<f64>, Option<Vec<f64>>)> = input_grad
        .data_mut()
        .par_chunks_mut(in_stride)
        .enumerate()
        .map(|(s, ig)| {
            let mut kg = vec![0.0; params.kernel.len()];
            let mut bg = params.bias.as_ref().map(|b| vec![0.0; b.len()]);
            conv_backward_sample(
                params,
                &input.data()[s * in_stride..(s + 1) * in_stride],
                &upstream.data()[s * out_stride..(s + 1) * out_stride],
                h,
                w,
                Some(ig),
                &mut kg,
                bg.as_deref_mut(),
            );
            (kg, bg)
        })
        .collect();
    let mut kernel = vec![0.0; params.kernel.len()];
    let mut bias = params.bias.as_ref().map(|b| vec![0.0; b.len()]);
    for (kg, bg) in per_sample {
        kernel.iter_mut().zip(&kg).for_each(|(a, b)| *a += b);
        if let (Some(acc), Some(bg)) = (bias.as_mut(), bg) {
            acc.iter_mut().zip(&bg).for_each(|(a, b)| *a += b);
        }
    }
    Ok(ConvGrads { input: input_grad, kernel, bias })
}
