//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::DateTime;
use pan_core::grid::{GridSpec, TRIP_CSV_HEADER};
use serde_json::{json, Value};

fn iso(t: i64) -> String {
    DateTime::from_timestamp(t, 0).unwrap().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// One CSV line per trip; each trip starts and ends at the centre of the
/// same cell within one slot, so start and end grids are identical.
pub fn trips_for_counts(spec: &GridSpec, count: impl Fn(usize, usize, usize) -> u32) -> String {
    let mut out = format!("{TRIP_CSV_HEADER}\n");
    let h = (spec.lat_max - spec.lat_min) / spec.rows as f64;
    let w = (spec.lon_max - spec.lon_min) / spec.cols as f64;
    for t in 0..spec.num_slots {
        let start = spec.origin_time + t as i64 * spec.slot_seconds;
        for i in 0..spec.rows {
            for j in 0..spec.cols {
                let lat = spec.lat_min + (i as f64 + 0.5) * h;
                let lon = spec.lon_min + (j as f64 + 0.5) * w;
                for n in 0..count(t, i, j) {
                    let s = start + (n as i64 % spec.slot_seconds);
                    writeln!(out, "{},{},{lat},{lon},{lat},{lon}", iso(s), iso(s)).unwrap();
                }
            }
        }
    }
    out
}

/// Small config: a 3x4 grid of 6-hour slots over ten days, a one-block
/// network and a seven-day training split.
pub fn small_config() -> Value {
    json!({
        "seed": 11,
        "grid": {
            "lat_min": 0.0, "lat_max": 3.0, "lon_min": 0.0, "lon_max": 4.0,
            "rows": 3, "cols": 4,
            "slot_seconds": 21600,
            "origin_time": "2020-01-01T00:00:00Z",
            "num_slots": 40
        },
        "window": { "recent": 2, "days": 1, "weeks": 0 },
        "model": {
            "pasti_blocks": 1, "feature_channels": 4,
            "n0": 1, "n1": 1, "n2": 1, "c0": 4, "c1": 2, "c2": 2
        },
        "train": { "epochs": 3, "batch_size": 8, "lr": 1e-3 },
        "split": { "train_days": 7 },
        "paths": { "trips": "trips.csv", "runs_root": "runs" }
    })
}

/// Daily-periodic counts between 10 and 29.
pub fn daily_counts(t: usize, i: usize, j: usize) -> u32 {
    10 + (((t % 4) * 7 + i * 3 + j * 5) % 20) as u32
}

pub fn grid_of(cfg: &Value) -> GridSpec {
    serde_json::from_value(cfg["grid"].clone()).unwrap()
}

/// Writes `config.json` and the trip CSV into `dir`; returns the config path.
pub fn write_fixture(dir: &Path, cfg: &Value, count: impl Fn(usize, usize, usize) -> u32) -> PathBuf {
    std::fs::write(dir.join("trips.csv"), trips_for_counts(&grid_of(cfg), count)).unwrap();
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}
