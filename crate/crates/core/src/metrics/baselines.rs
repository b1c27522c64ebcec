use crate::error::{PanError, Result};

/// Historical average: each target slot gets the per-cell, per-state mean
/// of the training frames at the same slot-of-week. An empty slot-of-week
/// bucket would fall back to the overall training mean, though requiring a
/// full week of frames keeps every bucket populated.
///
/// `train` holds consecutive frames starting at slot `first_slot`.
pub fn baseline_ha(train: &[Vec<f64>], first_slot: usize, targets: &[usize], slots_per_week: usize) -> Result<Vec<Vec<f64>>> {
    if slots_per_week == 0 || train.len() < slots_per_week {
        return Err(PanError::Data(format!(
            "historical average needs at least one full week ({slots_per_week} slots) of training frames, got {}",
            train.len()
        )));
    }
    let len = train[0].len();
    let mut sums = vec![vec![0.0; len]; slots_per_week];
    let mut counts = vec![0usize; slots_per_week];
    let mut total = vec![0.0; len];
    for (offset, frame) in train.iter().enumerate() {
        let bucket = (first_slot + offset) % slots_per_week;
        counts[bucket] += 1;
        for ((s, t), &v) in sums[bucket].iter_mut().zip(total.iter_mut()).zip(frame) {
            *s += v;
            *t += v;
        }
    }
    let global: Vec<f64> = total.iter().map(|t| t / train.len() as f64).collect();
    Ok(targets
        .iter()
        .map(|&t| {
            let b = t % slots_per_week;
            match counts[b] {
                0 => global.clone(),
                n => sums[b].iter().map(|s| s / n as f64).collect(),
            }
        })
        .collect())
}

/// Persistence: the prediction for slot `t` is the observed frame `t - 1`.
///
/// `frames` holds consecutive frames starting at slot `first_slot`.
pub fn baseline_persistence(frames: &[Vec<f64>], first_slot: usize, targets: &[usize]) -> Result<Vec<Vec<f64>>> {
    targets
        .iter()
        .map(|&t| {
            t.checked_sub(1 + first_slot)
                .and_then(|i| frames.get(i))
                .cloned()
                .ok_or_else(|| PanError::Data(format!("persistence needs frame {} for target slot {t}", t.wrapping_sub(1))))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridLayout;
    use crate::metrics::evaluate;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_data_is_reproduced() {
        let train = vec![vec![7.0, 3.0]; 30];
        let p = baseline_ha(&train, 0, &[30, 31, 45], 14).unwrap();
        assert!(p.iter().all(|f| f == &vec![7.0, 3.0]));
        let q = baseline_persistence(&train, 0, &[5, 29]).unwrap();
        assert!(q.iter().all(|f| f == &vec![7.0, 3.0]));
    }

    #[test]
    fn two_weeks_average_by_hand() {
        // slot-of-week 2 sees 4.0 in week one and 10.0 in week two
        let mut train = vec![vec![0.0]; 14];
        train[2] = vec![4.0];
        train[9] = vec![10.0];
        assert_eq!(baseline_ha(&train, 0, &[16], 7).unwrap(), vec![vec![7.0]]);
    }

    #[test]
    fn weekly_periodic_continuation_is_exact() {
        let week = 12;
        let f = |t: usize| vec![(t % week) as f64 * 3.0 + 10.0, ((t * 7) % week) as f64];
        let train: Vec<_> = (5..5 + 3 * week).map(f).collect();
        let targets: Vec<usize> = (5 + 3 * week..5 + 5 * week).collect();
        let pred = baseline_ha(&train, 5, &targets, week).unwrap();
        let truth: Vec<_> = targets.iter().map(|&t| f(t)).collect();
        assert_eq!(pred, truth);
    }

    #[test]
    fn partial_week_is_rejected() {
        let train: Vec<_> = (0..7).map(|t| vec![t as f64]).collect();
        assert_eq!(baseline_ha(&train[..6], 0, &[6], 7).unwrap_err().exit_code(), 2);
        assert_eq!(baseline_ha(&train, 0, &[13], 7).unwrap(), vec![vec![6.0]]);
    }

    #[test]
    fn step_change_error_equals_step_height() {
        let frames = vec![vec![5.0, 5.0], vec![8.0, 2.0]];
        let p = baseline_persistence(&frames, 10, &[11]).unwrap();
        let err: Vec<f64> = p[0].iter().zip(&frames[1]).map(|(a, b)| (a - b).abs()).collect();
        assert_eq!(err, vec![3.0, 3.0]);
        assert!(baseline_persistence(&frames, 10, &[10]).is_err());
    }

    #[test]
    fn random_walk_persistence_rmse_is_step_std() {
        let sigma = 2.0;
        let mut rng = crate::PanRng::seed_from_u64(7);
        let noise = Normal::new(0.0, sigma).unwrap();
        let cells = 50;
        let mut frames = vec![vec![1000.0; cells]];
        for _ in 0..400 {
            let prev = frames.last().unwrap();
            frames.push(prev.iter().map(|v| v + noise.sample(&mut rng)).collect());
        }
        let targets: Vec<usize> = (1..frames.len()).collect();
        let pred = baseline_persistence(&frames, 0, &targets).unwrap();
        let layout = GridLayout { rows: 1, cols: cells, states: 1 };
        let r = evaluate(&pred, &frames[1..], layout, 0.0, (1, frames.len())).unwrap();
        let rmse = r.states[0].rmse.unwrap();
        // 20 000 samples: the std error of the estimate is about 0.5%
        assert!((rmse - sigma).abs() < 0.03 * sigma, "{rmse}");
    }
}
