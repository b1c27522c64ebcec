//! RMSE and MAPE per state channel with a low-volume filter, plus the
//! historical-average and persistence baselines.
//!
//! Samples whose true count is below the threshold are dropped from both
//! the sums and the averaging count; a state with no retained samples
//! reports `None` for both metrics.

mod baselines;

pub use baselines::{baseline_ha, baseline_persistence};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::grid::GridLayout;

/// Metrics for one state channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub state: String,
    /// Raw-count units.
    pub rmse: Option<f64>,
    /// A ratio, not a percentage.
    pub mape: Option<f64>,
    pub evaluated: usize,
    pub filtered: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub states: Vec<StateMetrics>,
    /// Target timeslots `[T1, T2)`.
    pub range: (usize, usize),
}

impl MetricsReport {
    pub fn state(&self, name: &str) -> Option<&StateMetrics> {
        self.states.iter().find(|s| s.state == name)
    }
}

/// `start`/`end` for the two-state layout, `k{index}` otherwise.
pub fn state_name(k: usize, states: usize) -> String {
    match (states, k) {
        (2, 0) => "start".into(),
        (2, 1) => "end".into(),
        _ => format!("k{k}"),
    }
}

/// Scores raw-scale `preds` against `truths`, one frame per target slot of
/// `range`, keeping samples with `truth >= threshold`.
pub fn evaluate(
    preds: &[Vec<f64>],
    truths: &[Vec<f64>],
    layout: GridLayout,
    threshold: f64,
    range: (usize, usize),
) -> Result<MetricsReport> {
    let slots = range.1.checked_sub(range.0).unwrap_or(0);
    if preds.len() != slots || truths.len() != slots {
        return config_err(format!(
            "evaluate: {} predicted and {} true frames for a range of {slots} slots",
            preds.len(),
            truths.len()
        ));
    }
    if threshold.is_nan() {
        return config_err("evaluate: threshold is NaN");
    }
    let len = layout.frame_len();
    if let Some(bad) = preds.iter().chain(truths).find(|f| f.len() != len) {
        return config_err(format!("evaluate: frame of length {} for layout needing {len}", bad.len()));
    }
    let k_count = layout.states;
    let mut sq = vec![0.0; k_count];
    let mut ape = vec![0.0; k_count];
    let mut kept = vec![0usize; k_count];
    for (p_frame, d_frame) in preds.iter().zip(truths) {
        for (idx, (&p, &d)) in p_frame.iter().zip(d_frame).enumerate() {
            if d >= threshold {
                let k = idx % k_count;
                let e = p - d;
                sq[k] += e * e;
                ape[k] += e.abs() / d;
                kept[k] += 1;
            }
        }
    }
    let per_state = slots * layout.cells();
    let states = (0..k_count)
        .map(|k| {
            let n = kept[k];
            StateMetrics {
                state: state_name(k, k_count),
                rmse: (n > 0).then(|| (sq[k] / n as f64).sqrt()),
                mape: (n > 0).then(|| ape[k] / n as f64),
                evaluated: n,
                filtered: per_state - n,
            }
        })
        .collect();
    Ok(MetricsReport { states, range })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn layout(rows: usize, cols: usize, states: usize) -> GridLayout {
        GridLayout { rows, cols, states }
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let l = layout(2, 2, 2);
        let truth = vec![vec![12.0, 30.0, 15.0, 11.0, 40.0, 10.0, 22.0, 50.0]];
        let r = evaluate(&truth, &truth, l, 10.0, (5, 6)).unwrap();
        for s in &r.states {
            assert_eq!(s.rmse, Some(0.0));
            assert_eq!(s.mape, Some(0.0));
            assert_eq!(s.evaluated, 4);
        }
        assert_eq!(r.states[0].state, "start");
        assert_eq!(r.states[1].state, "end");
    }

    #[test]
    fn one_retained_cell_by_hand() {
        let l = layout(1, 2, 1);
        let r = evaluate(&[vec![110.0, 3.0]], &[vec![100.0, 5.0]], l, 10.0, (0, 1)).unwrap();
        let s = &r.states[0];
        assert!((s.mape.unwrap() - 0.1).abs() < 1e-15);
        assert!((s.rmse.unwrap() - 10.0).abs() < 1e-12);
        assert_eq!((s.evaluated, s.filtered), (1, 1));
        assert_eq!(s.state, "k0");
    }

    #[test]
    fn threshold_is_inclusive() {
        let l = layout(1, 3, 1);
        let r = evaluate(&[vec![0.0; 3]], &[vec![10.0, 9.999_999, 10.000_001]], l, 10.0, (0, 1)).unwrap();
        assert_eq!(r.states[0].evaluated, 2);
    }

    #[test]
    fn nothing_retained_marks_metrics_undefined() {
        let l = layout(2, 2, 2);
        let f = vec![vec![50.0; 8]];
        let r = evaluate(&f, &f, l, f64::INFINITY, (0, 1)).unwrap();
        for s in &r.states {
            assert_eq!((s.rmse, s.mape), (None, None));
            assert_eq!(s.filtered, 4);
        }
        let json = serde_json::to_string(&r.states[0]).unwrap();
        assert_eq!(json, r#"{"state":"start","rmse":null,"mape":null,"evaluated":0,"filtered":4}"#);
    }

    #[test]
    fn misaligned_inputs_are_rejected() {
        let l = layout(1, 1, 1);
        assert!(evaluate(&[vec![1.0]], &[vec![1.0]], l, 0.0, (0, 2)).is_err());
        assert!(evaluate(&[vec![1.0, 2.0]], &[vec![1.0]], l, 0.0, (0, 1)).is_err());
    }

    /// Straight transcription of the formulas, looping slot, cell, state.
    fn brute_force(p: &[Vec<f64>], d: &[Vec<f64>], l: GridLayout, thr: f64) -> Vec<(Option<f64>, Option<f64>, usize)> {
        (0..l.states)
            .map(|k| {
                let (mut s2, mut s1, mut n) = (0.0, 0.0, 0usize);
                for t in 0..p.len() {
                    for i in 0..l.rows {
                        for j in 0..l.cols {
                            let idx = l.index(i, j, k);
                            if d[t][idx] >= thr {
                                s2 += (p[t][idx] - d[t][idx]).powi(2);
                                s1 += (p[t][idx] - d[t][idx]).abs() / d[t][idx];
                                n += 1;
                            }
                        }
                    }
                }
                if n == 0 {
                    (None, None, 0)
                } else {
                    ((s2 / n as f64).sqrt().into(), (s1 / n as f64).into(), n)
                }
            })
            .collect()
    }

    fn random_case(seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = crate::PanRng::seed_from_u64(seed);
        let gen = |rng: &mut crate::PanRng| -> Vec<Vec<f64>> {
            (0..3)
                .map(|_| {
                    (0..50)
                        .map(|_| if rng.random_bool(0.2) { 10.0 } else { rng.random_range(0..30) as f64 })
                        .collect()
                })
                .collect()
        };
        (gen(&mut rng), gen(&mut rng))
    }

    #[test]
    fn matches_brute_force() {
        let l = layout(5, 5, 2);
        for seed in 0..20 {
            let (p, d) = random_case(seed);
            let r = evaluate(&p, &d, l, 10.0, (0, 3)).unwrap();
            for (s, (rmse, mape, n)) in r.states.iter().zip(brute_force(&p, &d, l, 10.0)) {
                assert_eq!(s.evaluated, n);
                assert!((s.rmse.unwrap() - rmse.unwrap()).abs() < 1e-12);
                assert!((s.mape.unwrap() - mape.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaling_leaves_mape_and_scales_rmse() {
        let l = layout(5, 5, 2);
        let (p, d) = random_case(99);
        let a = evaluate(&p, &d, l, 0.5, (0, 3)).unwrap();
        let scale = |f: &[Vec<f64>]| f.iter().map(|v| v.iter().map(|x| x * 4.0).collect()).collect::<Vec<Vec<f64>>>();
        let b = evaluate(&scale(&p), &scale(&d), l, 2.0, (0, 3)).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x.mape.unwrap() - y.mape.unwrap()).abs() < 1e-12);
            assert!((4.0 * x.rmse.unwrap() - y.rmse.unwrap()).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_samples(seed in 0u64..1000, lo in 0.0f64..20.0, step in 0.0f64..20.0) {
            let (p, d) = random_case(seed);
            let l = layout(5, 5, 2);
            let a = evaluate(&p, &d, l, lo, (0, 3)).unwrap();
            let b = evaluate(&p, &d, l, lo + step, (0, 3)).unwrap();
            for (x, y) in a.states.iter().zip(&b.states) {
                prop_assert!(y.evaluated <= x.evaluated);
                prop_assert_eq!(x.evaluated + x.filtered, 75);
            }
        }

        #[test]
        fn order_of_cells_does_not_matter(seed in 0u64..1000) {
            let (p, d) = random_case(seed);
            let l = layout(5, 5, 2);
            let a = evaluate(&p, &d, l, 10.0, (0, 3)).unwrap();
            // reverse the cell order and the slot order, keeping state lanes
            let rev = |f: &[Vec<f64>]| f.iter().rev().map(|v| v.chunks(2).rev().flatten().copied().collect()).collect::<Vec<Vec<f64>>>();
            let b = evaluate(&rev(&p), &rev(&d), l, 10.0, (0, 3)).unwrap();
            for (x, y) in a.states.iter().zip(&b.states) {
                prop_assert_eq!(x.evaluated, y.evaluated);
                prop_assert!((x.rmse.unwrap() - y.rmse.unwrap()).abs() < 1e-12);
                prop_assert!((x.mape.unwrap() - y.mape.unwrap()).abs() < 1e-12);
            }
        }
    }
}
