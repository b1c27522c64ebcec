use super::Tensor;
use crate::error::Result;

/// Elementwise `max(x, 0)`. NaN propagates so that divergence stays visible
/// downstream.
pub fn relu_forward(input: &Tensor) -> Tensor {
    input.map(|v| if v <= 0.0 { 0.0 } else { v })
}

/// Passes `grad_out` where `input > 0`; the subgradient at exactly 0 is 0.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    let mask = input.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    grad_out.mul(&mask)
}
