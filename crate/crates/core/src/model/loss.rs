use crate::error::{config_err, PanError, Result};
use crate::tensor::Tensor;

/// Weighted L1 plus squared error, summed per sample and averaged over the
/// batch: `mean_n( sum |(p - d)(1 - d)| + sum (p - d)^2 )`.
///
/// Returns the loss and its gradient with respect to `pred`. The L1
/// subgradient uses `sign(0) = 0`.
pub fn loss(pred: &Tensor, truth: &Tensor) -> Result<(f64, Tensor)> {
    if pred.dims() != truth.dims() {
        return config_err(format!("loss: prediction {} vs truth {}", pred.dims(), truth.dims()));
    }
    if let Some(bad) = truth.data().iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(PanError::Data(format!(
            "loss: truth value {bad} lies outside the normalized range [0, 1]"
        )));
    }
    let n = pred.dims().n as f64;
    let mut total = 0.0;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(&p, &d)| {
            let e = p - d;
            total += (e * (1.0 - d)).abs() + e * e;
            (sign(e) * (1.0 - d) + 2.0 * e) / n
        })
        .collect();
    Ok((total / n, Tensor::from_vec(pred.dims(), grad)?))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
