use super::tensor::Tensor;
use crate::error::{ensure, Result};

/// Number of terms the squared error is averaged over: every element except
/// the channel axis (dim 1 of `[N, C, H, W]`, dim 2 of `[N, T, C, H, W]`).
fn normaliser(shape: &[usize]) -> usize {
    let total: usize = shape.iter().product();
    match shape.len() {
        4 => total / shape[1].max(1),
        5 => total / shape[2].max(1),
        _ => total,
    }
}

/// Mean squared error and its gradient with respect to `output`.
pub fn mse_loss(output: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    ensure!(output.shape() == target.shape(), "output shape {:?} does not match target {:?}", output.shape(), target.shape());
    ensure!(!output.is_empty(), "loss of an empty tensor");
    let n = normaliser(output.shape()) as f64;
    let mut loss = 0.0;
    let grad: Vec<f64> = output
        .data()
        .iter()
        .zip(target.data())
        .map(|(o, t)| {
            let d = o - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, Tensor::from_vec(output.shape(), grad)?))
}
