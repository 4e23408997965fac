use crate::error::{ensure, Result};

pub const MAX_RANK: usize = 5;

/// Dense row-major array of up to five dimensions, conventionally
/// `(sample, time/patch, channel, height, width)` with leading roles dropped
/// for lower ranks. An optional gradient buffer of the same shape rides along.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.len() <= MAX_RANK, "tensor rank {} exceeds {MAX_RANK}", shape.len());
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()], grad: None }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let mut t = Tensor::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        ensure!(shape.len() <= MAX_RANK, "tensor rank {} exceeds {MAX_RANK}", shape.len());
        let n: usize = shape.iter().product();
        ensure!(n == data.len(), "shape {:?} needs {} values, got {}", shape, n, data.len());
        Ok(Tensor { shape: shape.to_vec(), data, grad: None })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<()> {
        ensure!(grad.len() == self.data.len(), "gradient length {} does not match tensor {}", grad.len(), self.data.len());
        self.grad = Some(grad);
        Ok(())
    }

    /// Gradient buffer, allocated as zeros on first use.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![0.0; n])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.fill(0.0);
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        ensure!(shape.len() <= MAX_RANK, "tensor rank {} exceeds {MAX_RANK}", shape.len());
        let n: usize = shape.iter().product();
        ensure!(n == self.data.len(), "cannot reshape {:?} into {:?}", self.shape, shape);
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// `(N, C, H, W)` of a rank-4 tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape.as_slice() {
            &[n, c, h, w] => Ok((n, c, h, w)),
            s => crate::error::invalid(format!("expected a rank-4 tensor, got shape {s:?}")),
        }
    }

    /// `(N, T, C, H, W)` of a rank-5 tensor.
    pub fn dims5(&self) -> Result<(usize, usize, usize, usize, usize)> {
        match self.shape.as_slice() {
            &[n, t, c, h, w] => Ok((n, t, c, h, w)),
            s => crate::error::invalid(format!("expected a rank-5 tensor, got shape {s:?}")),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect(), grad: None }
    }
}
