use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the input `x` and output `y = f(x)`.
    /// The ReLU derivative at zero is taken as 0.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown activation '{other}'"))),
        }
    }
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    x.map(|v| kind.apply(v))
}

pub fn activation_backward(x: &Tensor, kind: Activation, upstream: &Tensor) -> Result<Tensor> {
    ensure!(x.shape() == upstream.shape(), "upstream shape {:?} does not match {:?}", upstream.shape(), x.shape());
    let data = x.data().iter().zip(upstream.data()).map(|(&v, &g)| g * kind.derivative(v, kind.apply(v))).collect();
    Tensor::from_vec(x.shape(), data)
}
