//! Recurrent MSD network: the dense layer layout of the MSD with each
//! convolution replaced by a conv-GRU block, unrolled over a patch sequence.

use rayon::prelude::*;

use super::cell::{step_backward, step_forward, ConvGRUParams, GruVariant, StepTrace};
use super::patches::PatchSequence;
use crate::error::{ensure, Error, Result};
use crate::io::{Checkpoint, NamedTensor};
use crate::msd::{conv_specs, dilation_of_layer, layer_prefix, load_groups, MSDConfig, INIT_RANGE};
use crate::nn::{
    accumulate, conv_backward_sample, conv_forward_sample, uniform_init, ConvLayerParams, ParamSpec, Parameterized, Tensor,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MSDGRUWeights {
    pub layers: Vec<ConvGRUParams>,
    pub output: ConvLayerParams,
    pub variant: GruVariant,
}

impl MSDGRUWeights {
    pub fn zeros(config: &MSDConfig, variant: GruVariant) -> Result<Self> {
        config.validate()?;
        let layers = (1..=config.n_layers)
            .map(|k| ConvGRUParams::zeros(config.in_channels + k - 1, 1, dilation_of_layer(k, config.dilate_range)))
            .collect();
        Ok(MSDGRUWeights { layers, output: ConvLayerParams::zeros(config.stack_channels(), 1, 1, 1, true), variant })
    }

    /// Kernels drawn from `U[-0.25, 0.25)`, biases zero.
    pub fn init(config: &MSDConfig, variant: GruVariant, seed: u64) -> Result<Self> {
        let mut w = MSDGRUWeights::zeros(config, variant)?;
        let mut stream = seed;
        let mut fill = |k: &mut Vec<f64>| -> Result<()> {
            let t = uniform_init(&[k.len()], -INIT_RANGE, INIT_RANGE, stream)?;
            stream = stream.wrapping_add(1);
            k.copy_from_slice(t.data());
            Ok(())
        };
        for l in &mut w.layers {
            for p in [&mut l.wz, &mut l.uz, &mut l.wr, &mut l.ur, &mut l.wh, &mut l.uh] {
                fill(&mut p.kernel)?;
            }
        }
        fill(&mut w.output.kernel)?;
        Ok(w)
    }

    /// Output layer copies input channel 0; the GRU layers are ignored.
    pub fn identity(config: &MSDConfig, variant: GruVariant) -> Result<Self> {
        let mut w = MSDGRUWeights::zeros(config, variant)?;
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
                l.in_channels() == config.in_channels + k - 1
                    && l.hidden() == 1
                    && l.dilation() == dilation_of_layer(k, config.dilate_range),
                "GRU layer {k} does not match the MSD layout"
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
        ckpt.metadata.insert("model".into(), "msd-gru".into());
        ckpt.metadata.insert("variant".into(), self.variant.name().into());
        config.to_metadata(&mut ckpt);
        for (spec, data) in self.param_specs().into_iter().zip(self.params()) {
            ckpt.tensors.push(NamedTensor { name: spec.name, dims: spec.shape, data: data.to_vec() });
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(MSDConfig, MSDGRUWeights)> {
        let model = ckpt.require_meta("model")?;
        if model != "msd-gru" {
            return Err(Error::InvalidArgument(format!("checkpoint holds a '{model}' model, not msd-gru")));
        }
        let variant: GruVariant = ckpt.require_meta("variant")?.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
        let config = MSDConfig::from_metadata(ckpt)?;
        let mut w = MSDGRUWeights::zeros(&config, variant)?;
        load_groups(&mut w, ckpt)?;
        Ok((config, w))
    }
}

impl Parameterized for MSDGRUWeights {
    fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.specs(&layer_prefix(i + 1), &mut specs);
        }
        conv_specs("out", &self.output, &mut specs);
        specs
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.layers.iter().flat_map(|l| l.slices()).collect();
        v.push(&self.output.kernel);
        v.push(self.output.bias.as_deref().expect("output bias"));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect();
        v.push(&mut self.output.kernel);
        v.push(self.output.bias.as_deref_mut().expect("output bias"));
        v
    }
}

/// Exact count of stored scalars.
pub fn count_parameters_gru(weights: &MSDGRUWeights) -> usize {
    weights.num_parameters()
}

pub(crate) struct GruTrace {
    // Feature stack per step: input channels then one plane per layer.
    pub features: Vec<Vec<f64>>,
    pub steps: Vec<Vec<StepTrace>>,
    pub outputs: Vec<Vec<f64>>,
}

/// Runs one sample's sequence `x[t]` (each `c * h * w`).
pub(crate) fn forward_sequence(w: &MSDGRUWeights, config: &MSDConfig, xs: &[&[f64]], h: usize, wd: usize) -> GruTrace {
    let plane = h * wd;
    let c = config.in_channels;
    let stack = config.stack_channels();
    let zero = vec![0.0; plane];
    let mut features: Vec<Vec<f64>> = Vec::with_capacity(xs.len());
    let mut steps = Vec::with_capacity(xs.len());
    let mut outputs = Vec::with_capacity(xs.len());
    for (t, x) in xs.iter().enumerate() {
        let mut f = vec![0.0; stack * plane];
        f[..c * plane].copy_from_slice(&x[..c * plane]);
        let mut traces = Vec::with_capacity(config.n_layers);
        for (i, layer) in w.layers.iter().enumerate() {
            let ch = c + i;
            let hp: &[f64] = if t == 0 { &zero } else { &features[t - 1][ch * plane..(ch + 1) * plane] };
            let (inputs, rest) = f.split_at_mut(ch * plane);
            traces.push(step_forward(layer, w.variant, inputs, hp, h, wd, &mut rest[..plane]));
        }
        let mut y = vec![0.0; plane];
        conv_forward_sample(&w.output, &f, h, wd, &mut y, false);
        features.push(f);
        steps.push(traces);
        outputs.push(y);
    }
    GruTrace { features, steps, outputs }
}

/// Backpropagation through time; returns the gradient for each input step.
pub(crate) fn backward_sequence(
    w: &MSDGRUWeights,
    config: &MSDConfig,
    trace: &GruTrace,
    upstream: &[&[f64]],
    h: usize,
    wd: usize,
    grads: &mut MSDGRUWeights,
) -> Vec<Vec<f64>> {
    let plane = h * wd;
    let c = config.in_channels;
    let stack = config.stack_channels();
    let n_t = trace.features.len();
    let zero = vec![0.0; plane];
    // Gradient flowing into h_{k,t} from step t + 1.
    let mut carry = vec![vec![0.0; plane]; config.n_layers];
    let mut input_grads = vec![Vec::new(); n_t];
    let mut gh = vec![0.0; plane];
    for t in (0..n_t).rev() {
        let f = &trace.features[t];
        let mut g_feat = vec![0.0; stack * plane];
        conv_backward_sample(
            &w.output,
            f,
            upstream[t],
            h,
            wd,
            Some(&mut g_feat),
            &mut grads.output.kernel,
            grads.output.bias.as_deref_mut(),
        );
        for i in (0..config.n_layers).rev() {
            let ch = c + i;
            for ((g, a), b) in gh.iter_mut().zip(&g_feat[ch * plane..(ch + 1) * plane]).zip(&carry[i]) {
                *g = a + b;
            }
            let hp: &[f64] = if t == 0 { &zero } else { &trace.features[t - 1][ch * plane..(ch + 1) * plane] };
            let mut ghp = vec![0.0; plane];
            step_backward(
                &w.layers[i],
                w.variant,
                &f[..ch * plane],
                hp,
                &trace.steps[t][i],
                &gh,
                h,
                wd,
                &mut g_feat[..ch * plane],
                &mut ghp,
                &mut grads.layers[i],
            );
            carry[i] = ghp;
        }
        g_feat.truncate(c * plane);
        input_grads[t] = g_feat;
    }
    input_grads
}

fn check_sequence(seq: &PatchSequence, config: &MSDConfig) -> Result<(usize, usize, usize, usize)> {
    let (n, t, c, h, w) = seq.data().dims5()?;
    ensure!(c == config.in_channels, "sequence has {c} channels, network expects {}", config.in_channels);
    ensure!(t >= 1, "sequence has no time steps");
    Ok((n, t, h, w))
}

fn sample_steps(data: &[f64], s: usize, t: usize, step: usize) -> Vec<&[f64]> {
    (0..t).map(|k| &data[(s * t + k) * step..(s * t + k + 1) * step]).collect()
}

pub fn msd_gru_forward(seq: &PatchSequence, weights: &MSDGRUWeights, config: &MSDConfig) -> Result<PatchSequence> {
    weights.check(config)?;
    let (n, t, h, w) = check_sequence(seq, config)?;
    let step = config.in_channels * h * w;
    let plane = h * w;
    let mut out = Tensor::zeros(&[n, t, 1, h, w]);
    out.data_mut().par_chunks_mut(t * plane).enumerate().for_each(|(s, o)| {
        let xs = sample_steps(seq.data().data(), s, t, step);
        let trace = forward_sequence(weights, config, &xs, h, w);
        for (k, y) in trace.outputs.iter().enumerate() {
            o[k * plane..(k + 1) * plane].copy_from_slice(y);
        }
    });
    seq.with_data(out)
}

/// BPTT gradients for an upstream gradient on every output step.
pub fn msd_gru_backward(
    seq: &PatchSequence,
    weights: &MSDGRUWeights,
    config: &MSDConfig,
    upstream: &Tensor,
) -> Result<(Tensor, MSDGRUWeights)> {
    weights.check(config)?;
    let (n, t, h, w) = check_sequence(seq, config)?;
    ensure!(
        upstream.shape() == [n, t, 1, h, w],
        "upstream gradient shape {:?} does not match output [{n}, {t}, 1, {h}, {w}]",
        upstream.shape()
    );
    let step = config.in_channels * h * w;
    let plane = h * w;
    let per_sample: Vec<(Vec<Vec<f64>>, MSDGRUWeights)> = (0..n)
        .into_par_iter()
        .map(|s| {
            let xs = sample_steps(seq.data().data(), s, t, step);
            let gs = sample_steps(upstream.data(), s, t, plane);
            let trace = forward_sequence(weights, config, &xs, h, w);
            let mut g = MSDGRUWeights::zeros(config, weights.variant).expect("validated config");
            let gx = backward_sequence(weights, config, &trace, &gs, h, w, &mut g);
            (gx, g)
        })
        .collect();
    let mut grads = MSDGRUWeights::zeros(config, weights.variant)?;
    let mut gin = Vec::with_capacity(n * t * step);
    for (gx, g) in per_sample {
        gx.iter().for_each(|v| gin.extend_from_slice(v));
        accumulate(&mut grads, &g);
    }
    Ok((Tensor::from_vec(seq.data().shape(), gin)?, grads))
}
