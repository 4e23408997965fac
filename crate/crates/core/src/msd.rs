//! Mixed-scale dense (MSD) network: every hidden layer sees the input and
//! all earlier layer outputs, emits one channel through a dilated 3x3
//! convolution and ReLU, and a final 1x1 linear layer mixes all channels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::io::{Checkpoint, NamedTensor};
use crate::nn::{
    accumulate, conv_backward_sample, conv_forward_sample, uniform_init, ConvLayerParams, ParamSpec, Parameterized, Tensor,
};

pub const DEFAULT_LAYERS: usize = 15;
pub const DEFAULT_DILATE_RANGE: usize = 5;
pub const INIT_RANGE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MSDConfig {
    pub n_layers: usize,
    pub dilate_range: usize,
    pub in_channels: usize,
}

impl Default for MSDConfig {
    fn default() -> Self {
        MSDConfig { n_layers: DEFAULT_LAYERS, dilate_range: DEFAULT_DILATE_RANGE, in_channels: 1 }
    }
}

impl MSDConfig {
    pub fn new(n_layers: usize, dilate_range: usize, in_channels: usize) -> Result<Self> {
        let c = MSDConfig { n_layers, dilate_range, in_channels };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_layers >= 1, "an MSD network needs at least one layer");
        ensure!(self.dilate_range >= 1, "dilate range must be at least 1");
        ensure!(self.in_channels >= 1, "input channel count must be at least 1");
        Ok(())
    }

    /// Channels in the final feature stack (input plus one per layer).
    pub fn stack_channels(&self) -> usize {
        self.in_channels + self.n_layers
    }

    pub(crate) fn to_metadata(self, ckpt: &mut Checkpoint) {
        ckpt.metadata.insert("layers".into(), self.n_layers.to_string());
        ckpt.metadata.insert("dilate_range".into(), self.dilate_range.to_string());
        ckpt.metadata.insert("in_channels".into(), self.in_channels.to_string());
    }

    pub(crate) fn from_metadata(ckpt: &Checkpoint) -> Result<Self> {
        let num = |key: &str| -> Result<usize> {
            ckpt.require_meta(key)?.parse().map_err(|_| Error::Format(format!("metadata '{key}' is not a count")))
        };
        MSDConfig::new(num("layers")?, num("dilate_range")?, num("in_channels")?).map_err(|e| Error::Format(e.to_string()))
    }
}

/// `((k - 1) mod p) + 1` for 1-based layer `k`.
pub fn dilation_of_layer(k: usize, p: usize) -> usize {
    assert!(k >= 1 && p >= 1, "layer index and dilate range are 1-based");
    (k - 1) % p + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct MSDWeights {
    pub layers: Vec<ConvLayerParams>,
    pub output: ConvLayerParams,
}

impl MSDWeights {
    pub fn zeros(config: &MSDConfig) -> Result<Self> {
        config.validate()?;
        let layers = (1..=config.n_layers)
            .map(|k| ConvLayerParams::zeros(config.in_channels + k - 1, 1, 3, dilation_of_layer(k, config.dilate_range), true))
            .collect();
        Ok(MSDWeights { layers, output: ConvLayerParams::zeros(config.stack_channels(), 1, 1, 1, true) })
    }

    /// Kernels drawn from `U[-0.25, 0.25)`, biases zero.
    pub fn init(config: &MSDConfig, seed: u64) -> Result<Self> {
        let mut w = MSDWeights::zeros(config)?;
        for (i, layer) in w.layers.iter_mut().chain(std::iter::once(&mut w.output)).enumerate() {
            let t = uniform_init(&[layer.kernel.len()], -INIT_RANGE, INIT_RANGE, seed.wrapping_add(i as u64))?;
            layer.kernel.copy_from_slice(t.data());
        }
        Ok(w)
    }

    /// Zero hidden layers and an output layer that copies input channel 0.
    pub fn identity(config: &MSDConfig) -> Result<Self> {
        let mut w = MSDWeights::zeros(config)?;
        w.output.kernel[0] = 1.0;
        Ok(w)
    }

    pub fn check(&self, config: &MSDConfig) -> Result<()> {
        config.validate()?;
        ensure!(
            self.layers.len() == config.n_layers,
            "weights hold {} layers, config expects {}",
            self.layers.len(),
            config.n_layers
        );
        for (i, l) in self.layers.iter().enumerate() {
            let k = i + 1;
            l.validate()?;
            ensure!(
                l.in_channels == config.in_channels + k - 1
                    && l.out_channels == 1
                    && l.kernel_size == 3
                    && l.dilation == dilation_of_layer(k, config.dilate_range)
                    && l.bias.is_some(),
                "layer {k} does not match the MSD layout"
            );
        }
        self.output.validate()?;
        ensure!(
            self.output.kernel_size == 1
                && self.output.in_channels == config.stack_channels()
                && self.output.out_channels == 1
                && self.output.bias.is_some(),
            "output layer must be a 1x1 convolution over {} channels",
            config.stack_channels()
        );
        Ok(())
    }

    pub fn to_checkpoint(&self, config: &MSDConfig) -> Checkpoint {
        let mut ckpt = Checkpoint::default();
        ckpt.metadata.insert("model".into(), "msd".into());
        config.to_metadata(&mut ckpt);
        for (spec, data) in self.param_specs().into_iter().zip(self.params()) {
            ckpt.tensors.push(NamedTensor { name: spec.name, dims: spec.shape, data: data.to_vec() });
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(MSDConfig, MSDWeights)> {
        let model = ckpt.require_meta("model")?;
        if model != "msd" {
            return Err(Error::InvalidArgument(format!("checkpoint holds a '{model}' model, not msd")));
        }
        let config = MSDConfig::from_metadata(ckpt)?;
        let mut w = MSDWeights::zeros(&config)?;
        load_groups(&mut w, ckpt)?;
        Ok((config, w))
    }
}

/// Fills every parameter group of `model` from the same-named checkpoint tensor.
pub(crate) fn load_groups<P: Parameterized>(model: &mut P, ckpt: &Checkpoint) -> Result<()> {
    let specs = model.param_specs();
    for (spec, dst) in specs.iter().zip(model.params_mut()) {
        let t = ckpt.require(&spec.name)?;
        if t.dims != spec.shape {
            return Err(Error::Format(format!("tensor '{}' has dims {:?}, expected {:?}", spec.name, t.dims, spec.shape)));
        }
        dst.copy_from_slice(&t.data);
    }
    Ok(())
}

pub(crate) fn conv_specs(prefix: &str, p: &ConvLayerParams, out: &mut Vec<ParamSpec>) {
    out.push(ParamSpec { name: format!("{prefix}.kernel"), shape: p.kernel_shape().to_vec() });
    if p.bias.is_some() {
        out.push(ParamSpec { name: format!("{prefix}.bias"), shape: vec![p.out_channels] });
    }
}

pub(crate) fn layer_prefix(k: usize) -> String {
    format!("layer{k:02}")
}

impl Parameterized for MSDWeights {
    fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            conv_specs(&layer_prefix(i + 1), l, &mut specs);
        }
        conv_specs("out", &self.output, &mut specs);
        specs
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        for l in self.layers.iter().chain(std::iter::once(&self.output)) {
            v.push(l.kernel.as_slice());
            if let Some(b) = &l.bias {
                v.push(b.as_slice());
            }
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        for l in self.layers.iter_mut().chain(std::iter::once(&mut self.output)) {
            v.push(l.kernel.as_mut_slice());
            if let Some(b) = l.bias.as_mut() {
                v.push(b.as_mut_slice());
            }
        }
        v
    }
}

/// `sum_k [9 (c + k - 1) + 1] + (c + L) + 1`.
pub fn count_parameters_msd(config: &MSDConfig) -> usize {
    let c = config.in_channels;
    let hidden: usize = (1..=config.n_layers).map(|k| 9 * (c + k - 1) + 1).sum();
    hidden + config.stack_channels() + 1
}

// Per-sample activations kept for the backward pass.
pub(crate) struct MsdTrace {
    pub features: Vec<f64>,
    pub pre: Vec<f64>,
    pub output: Vec<f64>,
}

pub(crate) fn forward_sample(w: &MSDWeights, config: &MSDConfig, x: &[f64], h: usize, wd: usize) -> MsdTrace {
    let plane = h * wd;
    let c = config.in_channels;
    let mut features = vec![0.0; config.stack_channels() * plane];
    features[..c * plane].copy_from_slice(&x[..c * plane]);
    let mut pre = vec![0.0; config.n_layers * plane];
    for (i, layer) in w.layers.iter().enumerate() {
        let ch = c + i;
        let (inputs, rest) = features.split_at_mut(ch * plane);
        let a = &mut pre[i * plane..(i + 1) * plane];
        conv_forward_sample(layer, inputs, h, wd, a, false);
        for (o, &v) in rest[..plane].iter_mut().zip(a.iter()) {
            *o = v.max(0.0);
        }
    }
    let mut output = vec![0.0; plane];
    conv_forward_sample(&w.output, &features, h, wd, &mut output, false);
    MsdTrace { features, pre, output }
}

pub(crate) fn backward_sample(
    w: &MSDWeights,
    config: &MSDConfig,
    trace: &MsdTrace,
    upstream: &[f64],
    h: usize,
    wd: usize,
    grads: &mut MSDWeights,
) -> Vec<f64> {
    let plane = h * wd;
    let c = config.in_channels;
    let mut g_feat = vec![0.0; config.stack_channels() * plane];
    conv_backward_sample(
        &w.output,
        &trace.features,
        upstream,
        h,
        wd,
        Some(&mut g_feat),
        &mut grads.output.kernel,
        grads.output.bias.as_deref_mut(),
    );
    let mut g_pre = vec![0.0; plane];
    for i in (0..config.n_layers).rev() {
        let ch = c + i;
        let a = &trace.pre[i * plane..(i + 1) * plane];
        for ((gp, &gf), &av) in g_pre.iter_mut().zip(&g_feat[ch * plane..(ch + 1) * plane]).zip(a) {
            *gp = if av > 0.0 { gf } else { 0.0 };
        }
        let gl = &mut grads.layers[i];
        conv_backward_sample(
            &w.layers[i],
            &trace.features[..ch * plane],
            &g_pre,
            h,
            wd,
            Some(&mut g_feat[..ch * plane]),
            &mut gl.kernel,
            gl.bias.as_deref_mut(),
        );
    }
    g_feat.truncate(c * plane);
    g_feat
}

fn check_input(input: &Tensor, config: &MSDConfig) -> Result<(usize, usize, usize)> {
    let (n, c, h, w) = input.dims4()?;
    ensure!(c == config.in_channels, "input has {c} channels, network expects {}", config.in_channels);
    ensure!(h >= 1 && w >= 1, "input must be non-empty");
    Ok((n, h, w))
}

pub fn msd_forward(input: &Tensor, weights: &MSDWeights, config: &MSDConfig) -> Result<Tensor> {
    weights.check(config)?;
    let (n, h, w) = check_input(input, config)?;
    let stride = config.in_channels * h * w;
    let mut out = Tensor::zeros(&[n, 1, h, w]);
    out.data_mut().par_chunks_mut(h * w).enumerate().for_each(|(s, o)| {
        let trace = forward_sample(weights, config, &input.data()[s * stride..(s + 1) * stride], h, w);
        o.copy_from_slice(&trace.output);
    });
    Ok(out)
}

/// Gradients with respect to the input and every weight, for a given
/// upstream gradient on the output.
pub fn msd_backward(input: &Tensor, weights: &MSDWeights, config: &MSDConfig, upstream: &Tensor) -> Result<(Tensor, MSDWeights)> {
    weights.check(config)?;
    let (n, h, w) = check_input(input, config)?;
    ensure!(
        upstream.shape() == [n, 1, h, w],
        "upstream gradient shape {:?} does not match output [{n}, 1, {h}, {w}]",
        upstream.shape()
    );
    let stride = config.in_channels * h * w;
    let plane = h * w;
    let per_sample: Vec<(Vec<f64>, MSDWeights)> = (0..n)
        .into_par_iter()
        .map(|s| {
            let x = &input.data()[s * stride..(s + 1) * stride];
            let trace = forward_sample(weights, config, x, h, w);
            let mut g = MSDWeights::zeros(config).expect("validated config");
            let gx = backward_sample(weights, config, &trace, &upstream.data()[s * plane..(s + 1) * plane], h, w, &mut g);
            (gx, g)
        })
        .collect();
    let mut grads = MSDWeights::zeros(config)?;
    let mut gin = Vec::with_capacity(n * stride);
    for (gx, g) in per_sample {
        gin.extend_from_slice(&gx);
        accumulate(&mut grads, &g);
    }
    Ok((Tensor::from_vec(input.shape(), gin)?, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_schedule() {
        let d: Vec<usize> = (1..=15).map(|k| dilation_of_layer(k, 5)).collect();
        assert_eq!(d, vec![1, 2, 3, 4, 5, 1, 2, 3, 4, 5, 1, 2, 3, 4, 5]);
        assert_eq!(dilation_of_layer(7, 1), 1);
        assert_eq!(dilation_of_layer(4, 3), 1);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(count_parameters_msd(&MSDConfig::new(1, 5, 1).unwrap()), 13);
        let cfg = MSDConfig::default();
        assert_eq!(count_parameters_msd(&cfg), MSDWeights::zeros(&cfg).unwrap().flatten().len());
    }

    #[test]
    fn zero_and_identity_networks() {
        let cfg = MSDConfig::new(3, 2, 1).unwrap();
        let x = uniform_init(&[2, 1, 6, 5], 0.0, 1.0, 3).unwrap();
        let zero = msd_forward(&x, &MSDWeights::zeros(&cfg).unwrap(), &cfg).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
        let id = msd_forward(&x, &MSDWeights::identity(&cfg).unwrap(), &cfg).unwrap();
        assert_eq!(id.data(), x.data());
    }

    #[test]
    fn mismatches_rejected() {
        let cfg = MSDConfig::new(2, 2, 1).unwrap();
        let w = MSDWeights::zeros(&cfg).unwrap();
        assert!(msd_forward(&Tensor::zeros(&[1, 2, 4, 4]), &w, &cfg).is_err());
        let other = MSDConfig::new(3, 2, 1).unwrap();
        assert!(msd_forward(&Tensor::zeros(&[1, 1, 4, 4]), &w, &other).is_err());
        assert!(MSDConfig::new(0, 1, 1).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let cfg = MSDConfig::new(3, 2, 1).unwrap();
        let w = MSDWeights::init(&cfg, 5).unwrap();
        let ckpt = w.to_checkpoint(&cfg);
        assert!(ckpt.get("layer03.kernel").is_some() && ckpt.get("out.bias").is_some());
        let (cfg2, w2) = MSDWeights::from_checkpoint(&ckpt).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(w2, w);
    }
}
