//! Classical reconstruction: analytic (FBP) and iterative (SIRT, CGLS, TV-min).

mod beer_lambert;
mod cgls;
mod fbp;
mod sirt;
mod tvmin;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use beer_lambert::{log_normalize, transmit};
pub use cgls::{cgls, cgls_with_history};
pub use fbp::{fbp, padded_len, ram_lak_response, ramp_filter};
pub use sirt::{sirt, Sirt, WEIGHT_EPS};
pub use tvmin::{
    gradient, gradient_adjoint_add, operator_norm, total_variation, tvmin, DEFAULT_TV_ITERATIONS, DEFAULT_TV_WEIGHT,
};

use crate::error::{ensure, Error, Result};
use crate::geometry::{Geometry, Image, Sinogram};

pub const DEFAULT_SIRT_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fbp,
    Sirt,
    Cgls,
    Tvmin,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fbp, Method::Sirt, Method::Cgls, Method::Tvmin];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fbp => "fbp",
            Method::Sirt => "sirt",
            Method::Cgls => "cgls",
            Method::Tvmin => "tvmin",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fbp" => Ok(Method::Fbp),
            "sirt" => Ok(Method::Sirt),
            "cgls" => Ok(Method::Cgls),
            "tvmin" | "tv-min" | "tv" => Ok(Method::Tvmin),
            other => Err(Error::InvalidArgument(format!("unknown reconstruction method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Filter {
    RamLak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub method: Method,
    pub iterations: usize,
    pub tv_weight: f64,
    pub filter: Filter,
}

impl ReconConfig {
    /// Defaults per method: SIRT and CGLS 100 iterations, TV-min 200 at weight 0.1.
    pub fn new(method: Method) -> Self {
        let iterations = match method {
            Method::Tvmin => DEFAULT_TV_ITERATIONS,
            _ => DEFAULT_SIRT_ITERATIONS,
        };
        ReconConfig { method, iterations, tv_weight: DEFAULT_TV_WEIGHT, filter: Filter::RamLak }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_tv_weight(mut self, tv_weight: f64) -> Self {
        self.tv_weight = tv_weight;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.method != Method::Fbp {
            ensure!(self.iterations >= 1, "{} needs at least one iteration", self.method);
        }
        ensure!(self.tv_weight >= 0.0, "TV weight must be non-negative");
        Ok(())
    }
}

pub fn reconstruct(sinogram: &Sinogram, geometry: &Geometry, config: &ReconConfig) -> Result<Image> {
    config.validate()?;
    match config.method {
        Method::Fbp => fbp(sinogram, geometry),
        Method::Sirt => sirt(sinogram, geometry, config.iterations, None),
        Method::Cgls => cgls(sinogram, geometry, config.iterations),
        Method::Tvmin => tvmin(sinogram, geometry, config.iterations, config.tv_weight),
    }
}
