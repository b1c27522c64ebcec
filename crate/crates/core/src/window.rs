//! Recent, daily and weekly lookback windows.
//!
//! For an anchor slot `t` (the model predicts slot `t + 1`) the plan is
//!
//! * recent: `t, t-1, ..., t-n_r+1`
//! * daily, for `q = 1..=n_d`: `t+n_r-q*L_d` down to `t-n_r+1-q*L_d`
//! * weekly, for `q = 1..=n_w`: the same run with `L_w`
//!
//! concatenated in that order, giving `n_r + 2*n_r*n_d + 2*n_r*n_w` slots.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, PanError, Result};
use crate::grid::NormalizedSeries;
use crate::tensor::{Dims, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    /// Recent slots `n_r`.
    pub recent: usize,
    /// Previous days `n_d`.
    pub days: usize,
    /// Previous weeks `n_w`.
    pub weeks: usize,
    pub slots_per_day: usize,
    pub slots_per_week: usize,
}

impl WindowConfig {
    pub fn new(recent: usize, days: usize, weeks: usize, slots_per_day: usize) -> Result<Self> {
        let cfg = WindowConfig {
            recent,
            days,
            weeks,
            slots_per_day,
            slots_per_week: 7 * slots_per_day,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.recent == 0 {
            return config_err("window needs at least one recent slot");
        }
        if self.slots_per_day == 0 || self.slots_per_week != 7 * self.slots_per_day {
            return config_err(format!(
                "slots_per_week ({}) must be 7 x slots_per_day ({})",
                self.slots_per_week, self.slots_per_day
            ));
        }
        // the newest daily/weekly slot t + n_r - L must not lie in the future
        if self.days > 0 && self.slots_per_day < self.recent {
            return config_err(format!(
                "slots_per_day ({}) must be >= recent ({}) so daily windows stay in the past",
                self.slots_per_day, self.recent
            ));
        }
        Ok(())
    }

    /// Number of slots in every plan.
    pub fn plan_len(&self) -> usize {
        self.recent + 2 * self.recent * self.days + 2 * self.recent * self.weeks
    }

    /// Input channels for `states` state channels per slot.
    pub fn input_channels(&self, states: usize) -> usize {
        self.plan_len() * states
    }

    /// Farthest lookback below the anchor.
    fn reach(&self) -> usize {
        self.recent - 1 + (self.days * self.slots_per_day).max(self.weeks * self.slots_per_week)
    }

    /// Smallest anchor whose plan has no negative index.
    pub fn earliest_valid(&self) -> usize {
        self.reach()
    }

    /// Smallest anchor whose plan stays at or after `first_slot`.
    pub fn earliest_valid_from(&self, first_slot: usize) -> usize {
        first_slot + self.reach()
    }
}

/// Resolved source slots for one anchor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowPlan {
    /// Slot being predicted, `t + 1`.
    pub target: usize,
    pub indices: Vec<usize>,
}

pub fn plan_window(t: usize, cfg: &WindowConfig) -> Result<WindowPlan> {
    cfg.validate()?;
    let min = cfg.earliest_valid();
    if t < min {
        return Err(PanError::Range { t, min });
    }
    let n_r = cfg.recent;
    let mut indices = Vec::with_capacity(cfg.plan_len());
    indices.extend((0..n_r).map(|k| t - k));
    for (count, period) in [(cfg.days, cfg.slots_per_day), (cfg.weeks, cfg.slots_per_week)] {
        for q in 1..=count {
            let top = t + n_r - q * period;
            indices.extend((0..2 * n_r).map(|k| top - k));
        }
    }
    debug_assert_eq!(indices.len(), cfg.plan_len());
    Ok(WindowPlan { target: t + 1, indices })
}

/// Gathers the planned frames into a `(1, I, J, len * K)` tensor; channel
/// `p * K + k` holds state `k` of the `p`-th planned slot.
pub fn materialize(plan: &WindowPlan, store: &NormalizedSeries) -> Result<Tensor> {
    let layout = store.layout;
    let k = layout.states;
    let c = plan.indices.len() * k;
    let mut out = Tensor::zeros(Dims::new(1, layout.rows, layout.cols, c));
    let frames = plan
        .indices
        .iter()
        .map(|&s| {
            store
                .frame(s)
                .ok_or_else(|| PanError::Data(format!("frame for slot {s} is missing from the store")))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = out.data_mut();
    for cell in 0..layout.cells() {
        let dst = &mut data[cell * c..(cell + 1) * c];
        for (p, frame) in frames.iter().enumerate() {
            dst[p * k..(p + 1) * k].copy_from_slice(&frame[cell * k..(cell + 1) * k]);
        }
    }
    Ok(out)
}

/// Stacks the inputs for several anchors into one batch.
pub fn materialize_batch(anchors: &[usize], cfg: &WindowConfig, store: &NormalizedSeries) -> Result<Tensor> {
    let parts = anchors
        .iter()
        .map(|&t| materialize(&plan_window(t, cfg)?, store))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&parts)
}

/// Normalised ground truth for the targets `t + 1` of each anchor,
/// shaped `(n, I, J, K)`.
pub fn targets_batch(anchors: &[usize], store: &NormalizedSeries) -> Result<Tensor> {
    let layout = store.layout;
    let mut data = Vec::with_capacity(anchors.len() * layout.frame_len());
    for &t in anchors {
        let frame = store
            .frame(t + 1)
            .ok_or_else(|| PanError::Data(format!("target frame for slot {} is missing", t + 1)))?;
        data.extend_from_slice(frame);
    }
    Tensor::from_vec(Dims::new(anchors.len(), layout.rows, layout.cols, layout.states), data)
}

/// Anchors whose whole lookback and target lie in `[lo, hi)`.
pub fn anchors_within(cfg: &WindowConfig, lo: usize, hi: usize) -> Vec<usize> {
    let first = cfg.earliest_valid_from(lo);
    (first..hi.saturating_sub(1)).collect()
}

/// Anchors whose target lies in `[target_lo, target_hi)`; lookback may reach
/// back to `history_lo`.
pub fn anchors_for_targets(cfg: &WindowConfig, history_lo: usize, target_lo: usize, target_hi: usize) -> Vec<usize> {
    let first = cfg.earliest_valid_from(history_lo).max(target_lo.saturating_sub(1));
    (first..target_hi.saturating_sub(1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridLayout;
    use proptest::prelude::*;

    #[test]
    fn hand_enumerated_plan() {
        let cfg = WindowConfig::new(2, 1, 0, 48).unwrap();
        let plan = plan_window(100, &cfg).unwrap();
        assert_eq!(plan.target, 101);
        assert_eq!(plan.indices, vec![100, 99, 54, 53, 52, 51]);
    }

    #[test]
    fn recent_only_plan() {
        let cfg = WindowConfig::new(3, 0, 0, 48).unwrap();
        assert_eq!(plan_window(7, &cfg).unwrap().indices, vec![7, 6, 5]);
        assert_eq!(WindowConfig::new(1, 0, 0, 48).unwrap().earliest_valid(), 0);
    }

    #[test]
    fn default_window_has_seventy_channels() {
        let cfg = WindowConfig::new(5, 2, 1, 48).unwrap();
        assert_eq!(cfg.plan_len(), 35);
        assert_eq!(cfg.input_channels(2), 70);
        assert_eq!(cfg.earliest_valid(), 340);
        let plan = plan_window(340, &cfg).unwrap();
        assert_eq!(*plan.indices.iter().min().unwrap(), 0);
        assert!(matches!(
            plan_window(339, &cfg),
            Err(PanError::Range { t: 339, min: 340 })
        ));
    }

    #[test]
    fn every_valid_anchor_stays_in_range() {
        // three synthetic weeks at 48 slots/day
        let cfg = WindowConfig::new(5, 2, 1, 48).unwrap();
        for t in cfg.earliest_valid()..3 * 7 * 48 {
            let plan = plan_window(t, &cfg).unwrap();
            assert!(plan.indices.iter().all(|&s| s <= t));
            assert!(plan.indices.iter().min().is_some());
        }
    }

    #[test]
    fn rejects_inconsistent_configs() {
        assert!(WindowConfig::new(0, 1, 1, 48).is_err());
        assert!(WindowConfig::new(5, 1, 0, 4).is_err());
        let mut cfg = WindowConfig::new(2, 1, 1, 24).unwrap();
        cfg.slots_per_week = 100;
        assert!(cfg.validate().is_err());
    }

    fn store(layout: GridLayout, slots: usize) -> NormalizedSeries {
        let frames = (0..slots)
            .map(|t| (0..layout.frame_len()).map(|v| (t * 1000 + v) as f64 / 1e6).collect())
            .collect();
        NormalizedSeries::from_values(layout, 0, frames).unwrap()
    }

    #[test]
    fn materialize_layout_matches_direct_indexing() {
        let layout = GridLayout { rows: 3, cols: 4, states: 2 };
        let cfg = WindowConfig::new(5, 2, 1, 6).unwrap();
        let st = store(layout, 120);
        let t = 60;
        let plan = plan_window(t, &cfg).unwrap();
        let x = materialize(&plan, &st).unwrap();
        assert_eq!(x.dims(), Dims::new(1, 3, 4, 70));
        for i in 0..3 {
            for j in 0..4 {
                for (p, &slot) in plan.indices.iter().enumerate() {
                    for k in 0..2 {
                        let direct = st.frame(slot).unwrap()[layout.index(i, j, k)];
                        assert_eq!(x.get(0, i, j, p * 2 + k), direct);
                    }
                }
                // first ten channels are slots t..t-4, K interleaved
                for c in 0..10 {
                    let slot = t - c / 2;
                    assert_eq!(x.get(0, i, j, c), st.frame(slot).unwrap()[layout.index(i, j, c % 2)]);
                }
            }
        }
    }

    #[test]
    fn single_and_duplicate_slots() {
        let layout = GridLayout { rows: 2, cols: 2, states: 2 };
        let st = store(layout, 10);
        let one = WindowPlan { target: 4, indices: vec![3] };
        let x = materialize(&one, &st).unwrap();
        assert_eq!(x.data(), st.frame(3).unwrap());
        let two = WindowPlan { target: 4, indices: vec![3, 3] };
        let x = materialize(&two, &st).unwrap();
        for cell in 0..4 {
            assert_eq!(x.data()[cell * 4..cell * 4 + 2], x.data()[cell * 4 + 2..cell * 4 + 4]);
        }
        let missing = WindowPlan { target: 12, indices: vec![11] };
        let err = materialize(&missing, &st).unwrap_err();
        assert!(err.to_string().contains("11"));
    }

    #[test]
    fn anchor_ranges() {
        let cfg = WindowConfig::new(2, 1, 0, 4).unwrap();
        // reach = 1 + 4 = 5
        assert_eq!(anchors_within(&cfg, 0, 10), vec![5, 6, 7, 8]);
        assert_eq!(anchors_for_targets(&cfg, 0, 10, 13), vec![9, 10, 11]);
        assert_eq!(anchors_for_targets(&cfg, 0, 3, 8), vec![5, 6]);
    }

    proptest! {
        #[test]
        fn plan_length_and_shift(
            recent in 1usize..6, days in 0usize..3, weeks in 0usize..2,
            extra_day in 0usize..10, offset in 0usize..50,
        ) {
            let cfg = WindowConfig::new(recent, days, weeks, recent + extra_day).unwrap();
            let t = cfg.earliest_valid() + offset;
            let a = plan_window(t, &cfg).unwrap();
            let b = plan_window(t + 1, &cfg).unwrap();
            prop_assert_eq!(a.indices.len(), recent + 2 * recent * days + 2 * recent * weeks);
            prop_assert!(a.indices.iter().all(|&s| s <= t));
            let shifted: Vec<usize> = a.indices.iter().map(|s| s + 1).collect();
            prop_assert_eq!(shifted, b.indices);
            if offset == 0 {
                prop_assert_eq!(*a.indices.iter().min().unwrap(), 0);
            }
        }
    }
}
