use log::{debug, info};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{loss, PanModel};
use crate::error::{config_err, PanError, Result};
use crate::grid::NormalizedSeries;
use crate::tensor::{Adam, AdamConfig, Mode};
use crate::window::{materialize_batch, targets_batch, WindowConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            lr: 1e-5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return config_err("batch_size must be >= 1");
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return config_err(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        Ok(())
    }
}

/// Per-epoch mean training loss (sample-weighted over batches).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub epoch_losses: Vec<f64>,
}

impl TrainTrace {
    /// `epoch,mean_loss` CSV with a header line; epochs count from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss\n");
        for (e, l) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!("{},{l:e}\n", e + 1));
        }
        out
    }
}

/// Trains `model` on the anchors `anchors` (each predicting slot `t + 1`).
///
/// The rng drives both the per-epoch shuffle and the dropout masks, so a
/// fixed seed reproduces the trace bit for bit.
pub fn train<R: Rng + ?Sized>(
    model: &mut PanModel,
    store: &NormalizedSeries,
    window: &WindowConfig,
    anchors: &[usize],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainTrace> {
    cfg.validate()?;
    if anchors.is_empty() {
        return config_err("no valid training timeslots: the training span is shorter than the window lookback");
    }
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut order = anchors.to_vec();
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = materialize_batch(batch, window, store)?;
            let truth = targets_batch(batch, store)?;
            let (pred, cache) = model.forward(&x, Mode::Train, rng)?;
            let (l, grad) = loss(&pred, &truth)?;
            if !l.is_finite() {
                let targets: Vec<usize> = batch.iter().map(|t| t + 1).collect();
                return Err(PanError::Numerical(format!(
                    "loss {l} in epoch {} for target slots {targets:?}",
                    epoch + 1
                )));
            }
            model.backward(&cache, &grad)?;
            adam.step(&mut model.params_mut())?;
            sum += l * batch.len() as f64;
        }
        let mean = sum / order.len() as f64;
        debug!("epoch {} mean loss {mean:e}", epoch + 1);
        trace.epoch_losses.push(mean);
    }
    if let Some(last) = trace.epoch_losses.last() {
        info!("trained {} epochs, final mean loss {last:e}", cfg.epochs);
    }
    Ok(trace)
}

/// Eval-mode predictions for the targets of `anchors`, in normalized units,
/// one frame per anchor.
pub fn predict_anchors(
    model: &PanModel,
    store: &NormalizedSeries,
    window: &WindowConfig,
    anchors: &[usize],
    batch_size: usize,
) -> Result<Vec<Vec<f64>>> {
    let frame_len = store.layout.frame_len();
    let mut out = Vec::with_capacity(anchors.len());
    for batch in anchors.chunks(batch_size.max(1)) {
        let y = model.predict(&materialize_batch(batch, window, store)?)?;
        if !y.is_finite() {
            return Err(PanError::Numerical(format!(
                "non-finite prediction for target slots starting at {}",
                batch[0] + 1
            )));
        }
        out.extend(y.data().chunks(frame_len).map(<[f64]>::to_vec));
    }
    Ok(out)
}
