use log::warn;
use serde::{Deserialize, Serialize};

use super::{FrameSeries, GridLayout};
use crate::error::{config_err, Result};

/// Global Min-Max statistics fitted on the training frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub v_min: f64,
    pub v_max: f64,
}

impl NormStats {
    pub fn new(v_min: f64, v_max: f64) -> Result<Self> {
        if !(v_min <= v_max) || !v_min.is_finite() || !v_max.is_finite() {
            return config_err(format!("invalid normalisation range [{v_min}, {v_max}]"));
        }
        Ok(NormStats { v_min, v_max })
    }

    /// Extremes over every cell, state and slot of `train`.
    pub fn fit(train: &FrameSeries) -> Result<Self> {
        let mut it = train.frames.iter().flat_map(|f| f.counts.iter().copied());
        let Some(first) = it.next() else {
            return config_err("cannot fit normalisation on an empty training split");
        };
        let (lo, hi) = it.fold((first, first), |(lo, hi), c| (lo.min(c), hi.max(c)));
        if lo == hi {
            warn!("training counts are constant ({lo}); normalisation maps everything to 0");
        }
        Self::new(lo as f64, hi as f64)
    }

    fn span(&self) -> f64 {
        self.v_max - self.v_min
    }

    /// `(x - v_min) / (v_max - v_min)` clipped to `[0, 1]`; 0 when the range
    /// is degenerate.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.span() == 0.0 {
            return 0.0;
        }
        ((x - self.v_min) / self.span()).clamp(0.0, 1.0)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        self.v_min + y * self.span()
    }
}

/// Normalised copy of a frame series, addressable by absolute slot.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSeries {
    pub layout: GridLayout,
    pub first_slot: usize,
    pub stats: NormStats,
    frames: Vec<Vec<f64>>,
}

impl NormalizedSeries {
    pub fn new(series: &FrameSeries, stats: NormStats) -> Self {
        if stats.span() == 0.0 {
            warn!("degenerate normalisation range; all normalised values are 0");
        }
        NormalizedSeries {
            layout: series.layout,
            first_slot: series.first_slot(),
            stats,
            frames: series
                .frames
                .iter()
                .map(|f| f.counts.iter().map(|&c| stats.normalize(c as f64)).collect())
                .collect(),
        }
    }

    /// Builds a store directly from already-normalised values.
    pub fn from_values(layout: GridLayout, first_slot: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = frames.iter().position(|f| f.len() != layout.frame_len()) {
            return config_err(format!(
                "frame {bad} has {} values, expected {}",
                frames[bad].len(),
                layout.frame_len()
            ));
        }
        Ok(NormalizedSeries {
            layout,
            first_slot,
            stats: NormStats { v_min: 0.0, v_max: 1.0 },
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// One past the last slot held.
    pub fn end_slot(&self) -> usize {
        self.first_slot + self.frames.len()
    }

    pub fn frame(&self, slot: usize) -> Option<&[f64]> {
        let idx = slot.checked_sub(self.first_slot)?;
        self.frames.get(idx).map(Vec::as_slice)
    }
}
