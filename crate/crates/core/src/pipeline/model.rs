use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geometry::Image;
use crate::gru::{self, GruVariant, MSDGRUWeights, PatchOrder};
use crate::io::{Checkpoint, NamedTensor};
use crate::msd::{self, MSDConfig, MSDWeights};
use crate::nn::{AdamConfig, AdamState, ParamSpec, Parameterized, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Msd,
    MsdGru,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Msd => "msd",
            ModelKind::MsdGru => "msd-gru",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msd" => Ok(ModelKind::Msd),
            "msd-gru" | "msd_gru" | "gru" => Ok(ModelKind::MsdGru),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

/// Architecture of a network to build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub msd: MSDConfig,
    pub variant: GruVariant,
    /// Patch height and width for the recurrent model.
    pub patch: (usize, usize),
    pub order: PatchOrder,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, n_layers: usize) -> Result<Self> {
        Ok(ModelSpec {
            kind,
            msd: MSDConfig { n_layers, ..MSDConfig::default() },
            variant: GruVariant::Standard,
            patch: (128, 128),
            order: PatchOrder::Raster,
        })
        .and_then(|s: ModelSpec| s.msd.validate().map(|_| s))
    }

    pub fn with_patch(mut self, h: usize, w: usize) -> Self {
        self.patch = (h, w);
        self
    }

    pub fn build(&self, seed: u64) -> Result<Network> {
        match self.kind {
            ModelKind::Msd => Ok(Network::Msd { config: self.msd, weights: MSDWeights::init(&self.msd, seed)? }),
            ModelKind::MsdGru => {
                ensure!(self.patch.0 >= 1 && self.patch.1 >= 1, "patch size must be positive");
                Ok(Network::MsdGru {
                    config: self.msd,
                    weights: MSDGRUWeights::init(&self.msd, self.variant, seed)?,
                    patch: self.patch,
                    order: self.order,
                })
            }
        }
    }
}

/// A trained or trainable streak-removal network.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Msd { config: MSDConfig, weights: MSDWeights },
    MsdGru { config: MSDConfig, weights: MSDGRUWeights, patch: (usize, usize), order: PatchOrder },
}

fn images_to_tensor(images: &[&Image]) -> Result<Tensor> {
    ensure!(!images.is_empty(), "no images given");
    let (w, h) = (images[0].width(), images[0].height());
    ensure!(images.iter().all(|i| i.width() == w && i.height() == h), "images in a batch must share dimensions");
    let mut data = Vec::with_capacity(images.len() * w * h);
    images.iter().for_each(|i| data.extend_from_slice(i.data()));
    Tensor::from_vec(&[images.len(), 1, h, w], data)
}

impl Network {
    pub fn kind(&self) -> ModelKind {
        match self {
            Network::Msd { .. } => ModelKind::Msd,
            Network::MsdGru { .. } => ModelKind::MsdGru,
        }
    }

    pub fn config(&self) -> &MSDConfig {
        match self {
            Network::Msd { config, .. } | Network::MsdGru { config, .. } => config,
        }
    }

    /// Pass-through network whose output equals its input.
    pub fn identity(spec: &ModelSpec) -> Result<Self> {
        let mut net = spec.build(0)?;
        match &mut net {
            Network::Msd { config, weights } => *weights = MSDWeights::identity(config)?,
            Network::MsdGru { config, weights, .. } => *weights = MSDGRUWeights::identity(config, spec.variant)?,
        }
        Ok(net)
    }

    fn check_image(&self, image: &Image) -> Result<()> {
        if let Network::MsdGru { patch: (ph, pw), .. } = self {
            ensure!(
                image.height().is_multiple_of(*ph) && image.width().is_multiple_of(*pw),
                "{}x{} image is not divisible into {ph}x{pw} patches",
                image.width(),
                image.height()
            );
        }
        Ok(())
    }

    pub fn apply(&self, image: &Image) -> Result<Image> {
        Ok(self.apply_batch(&[image])?.remove(0))
    }

    pub fn apply_batch(&self, images: &[&Image]) -> Result<Vec<Image>> {
        images.iter().try_for_each(|i| self.check_image(i))?;
        let x = images_to_tensor(images)?;
        let (n, _, h, w) = x.dims4()?;
        let out = match self {
            Network::Msd { config, weights } => msd::msd_forward(&x, weights, config)?,
            Network::MsdGru { config, weights, patch, order } => {
                let seq = gru::slice_patches(&x, patch.0, patch.1, *order)?;
                gru::stitch_patches(&gru::msd_gru_forward(&seq, weights, config)?)?
            }
        };
        let ps = images[0].pixel_size();
        (0..n)
            .map(|s| Image::from_vec(w, h, out.data()[s * h * w..(s + 1) * h * w].to_vec()).map(|i| i.with_pixel_size(ps)))
            .collect::<Result<Vec<_>>>()
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// every parameter, flattened in `params()` order.
    pub fn loss_and_grad(&self, inputs: &[&Image], targets: &[&Image]) -> Result<(f64, Vec<f64>)> {
        ensure!(inputs.len() == targets.len(), "{} inputs but {} targets", inputs.len(), targets.len());
        inputs.iter().try_for_each(|i| self.check_image(i))?;
        let x = images_to_tensor(inputs)?;
        let t = images_to_tensor(targets)?;
        ensure!(x.shape() == t.shape(), "inputs and targets differ in size");
        let (n, _, h, w) = x.dims4()?;
        let plane = h * w;
        let norm = (n * plane) as f64;
        let per_sample: Vec<(f64, Vec<f64>)> = match self {
            Network::Msd { config, weights } => (0..n)
                .into_par_iter()
                .map(|s| {
                    let trace = msd::forward_sample(weights, config, &x.data()[s * plane..(s + 1) * plane], h, w);
                    let (loss, g) = residual(&trace.output, &t.data()[s * plane..(s + 1) * plane], norm);
                    let mut grads = MSDWeights::zeros(config).expect("validated config");
                    msd::backward_sample(weights, config, &trace, &g, h, w, &mut grads);
                    (loss, grads.flatten())
                })
                .collect(),
            Network::MsdGru { config, weights, patch, order } => {
                let xs = gru::slice_patches(&x, patch.0, patch.1, *order)?;
                let ts = gru::slice_patches(&t, patch.0, patch.1, *order)?;
                let (_, steps, _, ph, pw) = xs.data().dims5()?;
                let pp = ph * pw;
                (0..n)
                    .into_par_iter()
                    .map(|s| {
                        let seq: Vec<&[f64]> =
                            (0..steps).map(|k| &xs.data().data()[(s * steps + k) * pp..(s * steps + k + 1) * pp]).collect();
                        let trace = gru::network::forward_sequence(weights, config, &seq, ph, pw);
                        let mut loss = 0.0;
                        let mut upstream = Vec::with_capacity(steps);
                        for (k, y) in trace.outputs.iter().enumerate() {
                            let tgt = &ts.data().data()[(s * steps + k) * pp..(s * steps + k + 1) * pp];
                            let (l, g) = residual(y, tgt, norm);
                            loss += l;
                            upstream.push(g);
                        }
                        let refs: Vec<&[f64]> = upstream.iter().map(Vec::as_slice).collect();
                        let mut grads = MSDGRUWeights::zeros(config, weights.variant).expect("validated config");
                        gru::network::backward_sequence(weights, config, &trace, &refs, ph, pw, &mut grads);
                        (loss, grads.flatten())
                    })
                    .collect()
            }
        };
        let mut total = 0.0;
        let mut grad = vec![0.0; self.num_parameters()];
        for (l, g) in per_sample {
            total += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((total, grad))
    }

    pub fn loss(&self, inputs: &[&Image], targets: &[&Image]) -> Result<f64> {
        let outputs = self.apply_batch(inputs)?;
        let norm = inputs.iter().map(|i| i.len()).sum::<usize>() as f64;
        Ok(outputs
            .iter()
            .zip(targets)
            .map(|(o, t)| o.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            / norm)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            Network::Msd { config, weights } => weights.to_checkpoint(config),
            Network::MsdGru { config, weights, patch, order } => {
                let mut c = weights.to_checkpoint(config);
                c.metadata.insert("order".into(), order.name().into());
                c.metadata.insert("patch".into(), format!("{}x{}", patch.0, patch.1));
                c
            }
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        match ckpt.require_meta("model")?.parse::<ModelKind>()? {
            ModelKind::Msd => {
                let (config, weights) = MSDWeights::from_checkpoint(ckpt)?;
                Ok(Network::Msd { config, weights })
            }
            ModelKind::MsdGru => {
                let (config, weights) = MSDGRUWeights::from_checkpoint(ckpt)?;
                let order = ckpt.meta("order").unwrap_or("raster").parse()?;
                let patch = match ckpt.meta("patch").and_then(|p| p.split_once('x')) {
                    Some((a, b)) => (
                        a.parse().map_err(|_| Error::Format(format!("bad patch metadata '{a}'")))?,
                        b.parse().map_err(|_| Error::Format(format!("bad patch metadata '{b}'")))?,
                    ),
                    None => (128, 128),
                };
                Ok(Network::MsdGru { config, weights, patch, order })
            }
        }
    }

    /// Checkpoint that also carries the optimiser: moments as
    /// `<param>.adam_m` / `<param>.adam_v` tensors, step count and settings
    /// as metadata.
    pub fn to_checkpoint_with_optimizer(&self, state: &AdamState) -> Result<Checkpoint> {
        let specs = self.param_specs();
        ensure!(
            state.first_moments().len() == specs.len()
                && specs.iter().zip(state.first_moments()).all(|(s, m)| s.shape.iter().product::<usize>() == m.len()),
            "optimiser state does not match the network parameters"
        );
        let mut c = self.to_checkpoint();
        for ((spec, m), v) in specs.iter().zip(state.first_moments()).zip(state.second_moments()) {
            c.tensors.push(NamedTensor { name: format!("{}{ADAM_M}", spec.name), dims: spec.shape.clone(), data: m.clone() });
            c.tensors.push(NamedTensor { name: format!("{}{ADAM_V}", spec.name), dims: spec.shape.clone(), data: v.clone() });
        }
        let cfg = state.config;
        for (key, value) in [
            ("adam_step", state.step_count.to_string()),
            ("adam_lr", cfg.lr.to_string()),
            ("adam_beta1", cfg.beta1.to_string()),
            ("adam_beta2", cfg.beta2.to_string()),
            ("adam_epsilon", cfg.epsilon.to_string()),
        ] {
            c.metadata.insert(key.into(), value);
        }
        Ok(c)
    }

    /// Optimiser state stored next to this network's weights, if any.
    pub fn optimizer_from_checkpoint(&self, ckpt: &Checkpoint) -> Result<Option<AdamState>> {
        let Some(step) = ckpt.meta("adam_step") else {
            return Ok(None);
        };
        let num = |key: &str| -> Result<f64> {
            ckpt.require_meta(key)?.parse().map_err(|_| Error::Format(format!("metadata '{key}' is not a number")))
        };
        let step: u64 = step.parse().map_err(|_| Error::Format("metadata 'adam_step' is not a count".into()))?;
        let config = AdamConfig {
            lr: num("adam_lr")?,
            beta1: num("adam_beta1")?,
            beta2: num("adam_beta2")?,
            epsilon: num("adam_epsilon")?,
        };
        let (mut m, mut v) = (Vec::new(), Vec::new());
        for spec in self.param_specs() {
            for (suffix, out) in [(ADAM_M, &mut m), (ADAM_V, &mut v)] {
                let t = ckpt.require(&format!("{}{suffix}", spec.name))?;
                if t.dims != spec.shape {
                    return Err(Error::Format(format!("optimiser tensor for '{}' has dims {:?}", spec.name, t.dims)));
                }
                out.push(t.data.clone());
            }
        }
        Ok(Some(AdamState::from_moments(config, step, m, v)?))
    }

    pub fn set_patch(&mut self, h: usize, w: usize) {
        if let Network::MsdGru { patch, .. } = self {
            *patch = (h, w);
        }
    }
}

const ADAM_M: &str = ".adam_m";
const ADAM_V: &str = ".adam_v";

// Squared error sum of one output plane and the matching loss gradient.
fn residual(output: &[f64], target: &[f64], norm: f64) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let g = output
        .iter()
        .zip(target)
        .map(|(o, t)| {
            let d = o - t;
            loss += d * d;
            2.0 * d / norm
        })
        .collect();
    (loss / norm, g)
}

impl Parameterized for Network {
    fn param_specs(&self) -> Vec<ParamSpec> {
        match self {
            Network::Msd { weights, .. } => weights.param_specs(),
            Network::MsdGru { weights, .. } => weights.param_specs(),
        }
    }

    fn params(&self) -> Vec<&[f64]> {
        match self {
            Network::Msd { weights, .. } => weights.params(),
            Network::MsdGru { weights, .. } => weights.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Network::Msd { weights, .. } => weights.params_mut(),
            Network::MsdGru { weights, .. } => weights.params_mut(),
        }
    }
}
