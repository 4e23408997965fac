use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{Metric, MetricsReport, Summary};
use super::model::Network;
use crate::error::{ensure, Result};
use crate::geometry::{Geometry, Image};
use crate::noise::{apply_poisson_noise, NoiseConfig};
use crate::projector::ProjectionOperator;
use crate::recon::{reconstruct, Method, ReconConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub intensity: f64,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub intensities: Vec<f64>,
    pub sirt_iterations: usize,
    pub cgls_iterations: usize,
    pub tv_iterations: usize,
    pub tv_weight: f64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(intensities: Vec<f64>, seed: u64) -> Self {
        let sirt = ReconConfig::new(Method::Sirt);
        let tv = ReconConfig::new(Method::Tvmin);
        SweepConfig {
            intensities,
            sirt_iterations: sirt.iterations,
            cgls_iterations: ReconConfig::new(Method::Cgls).iterations,
            tv_iterations: tv.iterations,
            tv_weight: tv.tv_weight,
            seed,
        }
    }

    fn recon_config(&self, method: Method) -> ReconConfig {
        let cfg = ReconConfig::new(method).with_tv_weight(self.tv_weight);
        match method {
            Method::Fbp => cfg,
            Method::Sirt => cfg.with_iterations(self.sirt_iterations),
            Method::Cgls => cfg.with_iterations(self.cgls_iterations),
            Method::Tvmin => cfg.with_iterations(self.tv_iterations),
        }
    }
}

/// For each intensity, adds Poisson noise to the projections of every test
/// phantom, reconstructs with every classical method and restores the SIRT
/// result with each given network.
///
/// Phantom `j` always uses noise seed `seed + j`, so all intensities share
/// the same underlying random numbers.
pub fn noise_sweep(
    networks: &[(&str, &Network)],
    geometry: &Geometry,
    phantoms: &[Image],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    ensure!(!phantoms.is_empty(), "noise sweep needs test phantoms");
    ensure!(config.intensities.windows(2).all(|w| w[0] < w[1]), "intensities must be strictly increasing");
    let op = ProjectionOperator::new(geometry)?;
    let clean = phantoms.iter().map(|p| op.forward(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Image> = phantoms.iter().collect();
    let mut rows = Vec::new();
    for &intensity in &config.intensities {
        let noise: Vec<NoiseConfig> = (0..phantoms.len())
            .map(|j| NoiseConfig::new(intensity, config.seed.wrapping_add(j as u64)))
            .collect::<Result<_>>()?;
        let noisy = clean.iter().zip(&noise).map(|(p, n)| apply_poisson_noise(p, n)).collect::<Result<Vec<_>>>()?;
        let mut sirt_out = Vec::new();
        for method in Method::ALL {
            let cfg = config.recon_config(method);
            let recons = noisy.par_iter().map(|s| reconstruct(s, geometry, &cfg)).collect::<Result<Vec<_>>>()?;
            push_rows(&mut rows, method.name(), intensity, &MetricsReport::compute(&recons, &refs)?);
            if method == Method::Sirt {
                sirt_out = recons;
            }
        }
        for (name, net) in networks {
            let restored = sirt_out.par_iter().map(|r| net.apply(r)).collect::<Result<Vec<_>>>()?;
            push_rows(&mut rows, &format!("sirt+{name}"), intensity, &MetricsReport::compute(&restored, &refs)?);
        }
    }
    Ok(rows)
}

pub(crate) fn push_rows(rows: &mut Vec<SweepRow>, method: &str, intensity: f64, report: &MetricsReport) {
    for metric in Metric::ALL {
        let Summary { mean, std, n } = report.summary(metric);
        rows.push(SweepRow { method: method.to_string(), intensity, metric, mean, std, n });
    }
}

/// Rows for a metrics report, in the sweep table layout.
pub fn report_rows(method: &str, intensity: f64, report: &MetricsReport) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    push_rows(&mut rows, method, intensity, report);
    rows
}
