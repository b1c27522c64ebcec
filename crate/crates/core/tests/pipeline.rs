mod common;

use std::fs;
use std::path::Path;

use common::{daily_counts, small_config, write_fixture};
use pan_core::grid::{read_archive, TRIP_CSV_HEADER};
use pan_core::model::read_checkpoint;
use pan_core::pipeline::{self, merge, RunConfig, RunPaths, Scale};
use serde_json::{json, Value};

fn load(path: &Path) -> RunConfig {
    RunConfig::load(path, Scale::Paper, None).unwrap()
}

fn with(overrides: Value) -> Value {
    let mut cfg = small_config();
    merge(&mut cfg, overrides);
    cfg
}

#[test]
fn three_trip_fixture_lands_in_hand_placed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let csv = format!(
        "{TRIP_CSV_HEADER}\n\
         2020-01-01T01:00:00Z,2020-01-01T07:00:00Z,0.5,0.5,2.5,3.5\n\
         2020-01-02T12:30:00Z,2020-01-02T13:00:00Z,1.2,2.9,1.9,2.1\n\
         2020-01-02T12:00:00Z,2020-01-20T00:00:00Z,1.0,2.0,9.0,9.0\n"
    );
    fs::write(dir.path().join("trips.csv"), csv).unwrap();
    let cfg_path = dir.path().join("config.json");
    fs::write(&cfg_path, small_config().to_string()).unwrap();
    let cfg = load(&cfg_path);

    let report = pipeline::ingest(&cfg).unwrap();
    assert_eq!((report.trips, report.counted_start, report.dropped_start), (3, 3, 0));
    assert_eq!((report.counted_end, report.dropped_end), (2, 1));

    let series = read_archive(fs::File::open(RunPaths::new(&cfg).archive).unwrap()).unwrap();
    let l = series.layout;
    let at = |slot: usize, i, j, k| series.frames[slot].counts[l.index(i, j, k)];
    // 6-hour slots: 01:00 day 1 is slot 0, 07:00 slot 1, 12:00 day 2 slot 6
    assert_eq!(at(0, 0, 0, 0), 1);
    assert_eq!(at(1, 2, 3, 1), 1);
    assert_eq!(at(6, 1, 2, 0), 2);
    assert_eq!(at(6, 1, 2, 1), 1);
    assert_eq!(series.channel_total(0), 3);
    assert_eq!(series.channel_total(1), 2);
}

#[test]
fn header_only_csv_gives_all_zero_archive() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("trips.csv"), format!("{TRIP_CSV_HEADER}\n")).unwrap();
    let cfg_path = dir.path().join("config.json");
    fs::write(&cfg_path, small_config().to_string()).unwrap();
    let cfg = load(&cfg_path);
    let report = pipeline::ingest(&cfg).unwrap();
    assert_eq!(report.trips, 0);
    let series = read_archive(fs::File::open(RunPaths::new(&cfg).archive).unwrap()).unwrap();
    assert_eq!(series.len(), 40);
    assert!(series.frames.iter().all(|f| f.counts.iter().all(|&c| c == 0)));
}

#[test]
fn wrong_header_and_missing_input_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("trips.csv"), "a,b,c\n1,2,3\n").unwrap();
    let cfg_path = dir.path().join("config.json");
    fs::write(&cfg_path, small_config().to_string()).unwrap();
    assert_eq!(pipeline::ingest(&load(&cfg_path)).unwrap_err().exit_code(), 2);

    fs::remove_file(dir.path().join("trips.csv")).unwrap();
    assert_eq!(pipeline::ingest(&load(&cfg_path)).unwrap_err().exit_code(), 2);
    assert_eq!(pipeline::train(&load(&cfg_path)).unwrap_err().exit_code(), 2);
}

#[test]
fn zero_epochs_checkpoints_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(dir.path(), &with(json!({"train": {"epochs": 0}})), daily_counts);
    let cfg = load(&cfg_path);
    pipeline::ingest(&cfg).unwrap();
    let out = pipeline::train(&cfg).unwrap();
    assert!(out.trace.epoch_losses.is_empty());
    assert_eq!(fs::read_to_string(&out.loss_csv).unwrap(), "epoch,mean_loss\n");
    let ckpt = read_checkpoint(fs::File::open(&out.checkpoint).unwrap()).unwrap();
    assert_eq!(ckpt.digest, cfg.digest());
}

#[test]
fn train_converges_and_eval_reports_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(dir.path(), &with(json!({"train": {"epochs": 200}})), daily_counts);
    let cfg = load(&cfg_path);
    pipeline::ingest(&cfg).unwrap();
    let out = pipeline::train(&cfg).unwrap();
    let losses = &out.trace.epoch_losses;
    assert_eq!(losses.len(), 200);
    assert!(losses[199] < losses[0] * 0.1, "first {} last {}", losses[0], losses[199]);

    let report = pipeline::eval(&cfg).unwrap();
    assert_eq!(report.config_digest, cfg.digest());
    assert_eq!(report.split_boundary.slot, 28);
    assert_eq!(report.split_boundary.time, "2020-01-08T00:00:00Z");
    assert_eq!(report.range, (28, 40));
    for method in ["pan", "ha", "persistence"] {
        let m = report.method(method).unwrap();
        assert_eq!(m.states.len(), 2);
        for s in &m.states {
            assert!(s.rmse.is_some() && s.mape.is_some(), "{method}: {s:?}");
            assert_eq!(s.evaluated + s.filtered, 12 * 12);
        }
    }
    let pan = report.method("pan").unwrap().states[0].rmse.unwrap();
    let persistence = report.method("persistence").unwrap().states[0].rmse.unwrap();
    assert_eq!(report.method("ha").unwrap().states[0].rmse, Some(0.0));
    assert!(pan < 0.2 * persistence, "pan {pan} persistence {persistence}");

    let json: Value = serde_json::from_str(&fs::read_to_string(RunPaths::new(&cfg).report).unwrap()).unwrap();
    assert_eq!(json["results"][1]["method"], "ha");
    assert_eq!(json["results"][0]["states"][1]["state"], "end");
}

#[test]
fn infinite_threshold_filters_everything_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(dir.path(), &with(json!({"eval": {"threshold": 1e308}})), daily_counts);
    let cfg = load(&cfg_path);
    pipeline::ingest(&cfg).unwrap();
    pipeline::train(&cfg).unwrap();
    let report = pipeline::eval(&cfg).unwrap();
    for m in &report.results {
        for s in &m.states {
            assert_eq!((s.rmse, s.mape, s.evaluated), (None, None, 0));
        }
    }
}

#[test]
fn checkpoint_from_another_config_is_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(dir.path(), &small_config(), daily_counts);
    let cfg = load(&cfg_path);
    pipeline::ingest(&cfg).unwrap();
    let out = pipeline::train(&cfg).unwrap();

    let other = with(json!({
        "train": {"lr": 2e-3},
        "paths": {"checkpoint": out.checkpoint, "archive": RunPaths::new(&cfg).archive}
    }));
    let other_path = dir.path().join("other.json");
    fs::write(&other_path, other.to_string()).unwrap();
    let err = pipeline::eval(&load(&other_path)).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
}

#[test]
fn archive_for_a_different_grid_is_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(dir.path(), &small_config(), daily_counts);
    let cfg = load(&cfg_path);
    pipeline::ingest(&cfg).unwrap();
    let other = with(json!({"grid": {"rows": 2}, "paths": {"archive": RunPaths::new(&cfg).archive}}));
    let other_path = dir.path().join("other.json");
    fs::write(&other_path, other.to_string()).unwrap();
    assert_eq!(pipeline::train(&load(&other_path)).unwrap_err().exit_code(), 4);
}

#[test]
fn ablation_table_has_three_variants_per_state_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(dir.path(), &small_config(), daily_counts);
    let cfg = load(&cfg_path);
    pipeline::ingest(&cfg).unwrap();
    let rows = pipeline::ablate(&cfg).unwrap();
    assert_eq!(rows.len(), 6);
    let paths = RunPaths::new(&cfg);
    let table = fs::read_to_string(&paths.ablation_csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "variant,state,rmse,mape");
    for (k, v) in ["full", "full", "no_pac", "no_pac", "one_pac", "one_pac"].iter().enumerate() {
        assert!(lines[k + 1].starts_with(&format!("{v},{}", if k % 2 == 0 { "start" } else { "end" })));
    }
    for v in pan_core::Variant::ALL {
        let trace = fs::read_to_string(paths.variant_loss_csv(v)).unwrap();
        assert_eq!(trace.lines().count(), 4);
    }
    assert_eq!(pipeline::ablate(&cfg).unwrap(), rows);
    assert_eq!(fs::read_to_string(&paths.ablation_csv).unwrap(), table);
}
