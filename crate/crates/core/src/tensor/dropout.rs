use rand::Rng;

use super::Tensor;
use crate::error::{config_err, Result};

/// Whether stochastic layers are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout.
///
/// In train mode each element survives with probability `1 - rate` and is
/// scaled by `1 / (1 - rate)`; in eval mode the input is returned unchanged.
/// The returned mask holds the per-element multiplier (`0` or the scale) and
/// is what [`dropout_backward`] applies to the incoming gradient.
pub fn dropout<R: Rng + ?Sized>(
    input: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&rate) {
        return config_err(format!("dropout rate must be in [0, 1), got {rate}"));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((input.clone(), Tensor::full(input.dims(), 1.0)));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut mask = Tensor::zeros(input.dims());
    for m in mask.data_mut() {
        *m = if rng.random::<f64>() < rate { 0.0 } else { keep };
    }
    let out = input.mul(&mask)?;
    Ok((out, mask))
}

pub fn dropout_backward(mask: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.mul(mask)
}
