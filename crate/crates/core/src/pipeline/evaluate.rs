use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::DatasetPair;
use super::model::Network;
use crate::error::{ensure, Result};
use crate::geometry::Image;
use crate::metrics::{mse_metric, psnr, ssim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Ssim,
    Mse,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Psnr, Metric::Ssim, Metric::Mse];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::Mse => "mse",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 { (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Summary { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    pub mse: Vec<f64>,
}

impl MetricsReport {
    /// Scores each image against its reference as is, without clipping.
    pub fn compute(images: &[Image], references: &[&Image]) -> Result<Self> {
        ensure!(images.len() == references.len(), "{} images but {} references", images.len(), references.len());
        let per: Vec<(f64, f64, f64)> = images
            .par_iter()
            .zip(references.par_iter())
            .map(|(img, reference)| Ok((psnr(img, reference, 1.0)?, ssim(img, reference)?, mse_metric(img, reference)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsReport {
            psnr: per.iter().map(|p| p.0).collect(),
            ssim: per.iter().map(|p| p.1).collect(),
            mse: per.iter().map(|p| p.2).collect(),
        })
    }

    pub fn values(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Psnr => &self.psnr,
            Metric::Ssim => &self.ssim,
            Metric::Mse => &self.mse,
        }
    }

    pub fn summary(&self, metric: Metric) -> Summary {
        Summary::of(self.values(metric))
    }

    pub fn len(&self) -> usize {
        self.psnr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psnr.is_empty()
    }
}

/// Network outputs for every pair's input.
pub fn restore(network: &Network, pairs: &[DatasetPair]) -> Result<Vec<Image>> {
    pairs.par_iter().map(|p| network.apply(&p.input)).collect()
}

/// Metrics of the network outputs against the targets.
pub fn evaluate(network: &Network, pairs: &[DatasetPair]) -> Result<MetricsReport> {
    let outputs = restore(network, pairs)?;
    let targets: Vec<&Image> = pairs.iter().map(|p| &p.target).collect();
    MetricsReport::compute(&outputs, &targets)
}

/// Metrics of the raw SIRT inputs against the targets.
pub fn evaluate_inputs(pairs: &[DatasetPair]) -> Result<MetricsReport> {
    let inputs: Vec<Image> = pairs.iter().map(|p| p.input.clone()).collect();
    let targets: Vec<&Image> = pairs.iter().map(|p| &p.target).collect();
    MetricsReport::compute(&inputs, &targets)
}
