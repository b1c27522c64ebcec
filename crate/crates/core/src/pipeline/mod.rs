//! Reproducible runs driven by a [`RunConfig`].
//!
//! Every output lands in `runs_root/<first 16 hex digits of the digest>/`:
//!
//! | file | written by |
//! |------|------------|
//! | `frames.pangrid` | ingest |
//! | `ingest.json` | ingest |
//! | `model.ckpt`, `loss.csv` | train |
//! | `report.json` | eval |
//! | `ablation.csv`, `loss_<variant>.csv` | ablate |
//!
//! Each command is a pure function of the config, its input files and the
//! seed, so reruns reproduce every byte.

mod config;

pub use config::{merge, EvalConfig, PathsConfig, RunConfig, Scale, SplitConfig, WindowSettings};

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use log::{info, warn};
use rand::SeedableRng;
use serde::Serialize;

use crate::error::{PanError, Result};
use crate::grid::{read_archive, read_trips_csv, write_archive, FrameSeries, IngestReport, NormStats, NormalizedSeries, Rasterizer};
use crate::metrics::{baseline_ha, baseline_persistence, evaluate, StateMetrics};
use crate::model::{
    build_variant, predict_anchors, read_checkpoint, train as train_model, write_checkpoint, Checkpoint, ModelShape, PanModel,
    TrainTrace, Variant,
};
use crate::window::{anchors_for_targets, anchors_within, WindowConfig};
use crate::PanRng;

/// Resolved output locations of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub archive: PathBuf,
    pub ingest_report: PathBuf,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub report: PathBuf,
    pub ablation_csv: PathBuf,
}

impl RunPaths {
    pub fn new(cfg: &RunConfig) -> Self {
        let dir = cfg.paths.runs_root.join(&cfg.digest()[..16]);
        let or = |o: &Option<PathBuf>, name: &str| o.clone().unwrap_or_else(|| dir.join(name));
        RunPaths {
            archive: or(&cfg.paths.archive, "frames.pangrid"),
            ingest_report: dir.join("ingest.json"),
            checkpoint: or(&cfg.paths.checkpoint, "model.ckpt"),
            loss_csv: dir.join("loss.csv"),
            report: or(&cfg.paths.report, "report.json"),
            ablation_csv: dir.join("ablation.csv"),
            dir,
        }
    }

    pub fn variant_loss_csv(&self, v: Variant) -> PathBuf {
        self.dir.join(format!("loss_{}.csv", v.name()))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes).map_err(|e| io_at(path, e))
}

fn io_at(path: &Path, e: std::io::Error) -> PanError {
    PanError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_at(path, std::io::Error::new(e.kind(), format!("cannot open {what}: {e}"))))
}

/// Rasterises the trip CSV into the frame archive.
pub fn ingest(cfg: &RunConfig) -> Result<IngestReport> {
    let paths = RunPaths::new(cfg);
    let trips = cfg
        .paths
        .trips
        .as_ref()
        .ok_or_else(|| PanError::Config("paths.trips is required for ingest".into()))?;
    let mut raster = Rasterizer::new(&cfg.grid)?;
    for (row, rec) in read_trips_csv(open(trips, "trip CSV")?)?.enumerate() {
        match rec {
            Ok(trip) => raster.push(&trip),
            Err(reason) => {
                warn!("{}: skipping row {}: {reason}", trips.display(), row + 2);
                raster.note_malformed();
            }
        }
    }
    let (series, report) = raster.finish();
    let mut bytes = Vec::new();
    write_archive(&series, &mut bytes)?;
    write_file(&paths.archive, &bytes)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&paths.ingest_report, json.as_bytes())?;
    info!("wrote {} frames to {}", series.len(), paths.archive.display());
    Ok(report)
}

/// Frames, normalisation and anchor sets shared by train, eval and ablate.
struct Prepared {
    series: FrameSeries,
    window: WindowConfig,
    boundary: usize,
    store: NormalizedSeries,
    train_anchors: Vec<usize>,
    test_anchors: Vec<usize>,
}

impl Prepared {
    fn load(cfg: &RunConfig, paths: &RunPaths) -> Result<Self> {
        let series = read_archive(open(&paths.archive, "frame archive (run `pan ingest` first)")?)?;
        if series.layout != cfg.grid.layout() || series.len() != cfg.grid.num_slots {
            return Err(PanError::Mismatch(format!(
                "archive {} holds {} frames of {}x{}x{}, config expects {} frames of {}x{}x{}",
                paths.archive.display(),
                series.len(),
                series.layout.rows,
                series.layout.cols,
                series.layout.states,
                cfg.grid.num_slots,
                cfg.grid.rows,
                cfg.grid.cols,
                cfg.grid.layout().states
            )));
        }
        let window = cfg.window()?;
        let boundary = cfg.split_boundary()?;
        let (train, _) = series.split(boundary)?;
        let stats = NormStats::fit(&train)?;
        let store = NormalizedSeries::new(&series, stats);
        let first = series.first_slot();
        let end = first + series.len();
        let train_anchors = anchors_within(&window, first, boundary);
        let test_anchors = anchors_for_targets(&window, first, boundary, end);
        if test_anchors.is_empty() {
            return Err(PanError::Config("no valid test timeslots after the split boundary".into()));
        }
        Ok(Prepared {
            series,
            window,
            boundary,
            store,
            train_anchors,
            test_anchors,
        })
    }

    fn shape(&self) -> ModelShape {
        let l = self.series.layout;
        ModelShape {
            rows: l.rows,
            cols: l.cols,
            states: l.states,
            input_channels: self.window.input_channels(l.states),
        }
    }

    fn target_slots(&self) -> Vec<usize> {
        self.test_anchors.iter().map(|t| t + 1).collect()
    }

    fn target_range(&self) -> (usize, usize) {
        let t = self.target_slots();
        (t[0], t[t.len() - 1] + 1)
    }

    fn raw_frames(&self) -> Vec<Vec<f64>> {
        self.series.as_f64()
    }

    fn predict_raw(&self, model: &PanModel, batch: usize) -> Result<Vec<Vec<f64>>> {
        let stats = self.store.stats;
        let norm = predict_anchors(model, &self.store, &self.window, &self.test_anchors, batch)?;
        Ok(norm
            .into_iter()
            .map(|f| f.into_iter().map(|y| stats.denormalize(y)).collect())
            .collect())
    }

    fn truths(&self) -> Vec<Vec<f64>> {
        let raw = self.raw_frames();
        let first = self.series.first_slot();
        self.target_slots().iter().map(|&t| raw[t - first].clone()).collect()
    }
}

fn init_rng(seed: u64) -> PanRng {
    PanRng::seed_from_u64(seed)
}

/// Shuffling and dropout draw from their own stream so that changing the
/// architecture does not shift the batch order.
fn train_rng(seed: u64) -> PanRng {
    let mut rng = PanRng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn fit(cfg: &RunConfig, data: &Prepared, variant: Variant) -> Result<(PanModel, TrainTrace)> {
    let mut model = build_variant(variant, data.shape(), &cfg.model, &mut init_rng(cfg.seed))?;
    info!(
        "{} model: {} parameters, {} training windows",
        variant.name(),
        model.num_params(),
        data.train_anchors.len()
    );
    let trace = train_model(
        &mut model,
        &data.store,
        &data.window,
        &data.train_anchors,
        &cfg.train,
        &mut train_rng(cfg.seed),
    )?;
    Ok((model, trace))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub trace: TrainTrace,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
}

/// Trains the configured model and writes the checkpoint and loss trace.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let paths = RunPaths::new(cfg);
    let data = Prepared::load(cfg, &paths)?;
    let (model, trace) = fit(cfg, &data, cfg.model.variant)?;
    let mut bytes = Vec::new();
    write_checkpoint(&Checkpoint::from_model(&model, &cfg.digest()), &mut bytes)?;
    write_file(&paths.checkpoint, &bytes)?;
    write_file(&paths.loss_csv, trace.to_csv().as_bytes())?;
    Ok(TrainOutcome {
        trace,
        checkpoint: paths.checkpoint,
        loss_csv: paths.loss_csv,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitBoundary {
    pub slot: usize,
    pub time: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodResult {
    /// `pan`, `ha` or `persistence`.
    pub method: String,
    pub states: Vec<StateMetrics>,
}

/// The evaluation report written as JSON.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub config_digest: String,
    pub variant: Variant,
    pub split_boundary: SplitBoundary,
    /// Target slots `[T1, T2)`.
    pub range: (usize, usize),
    pub threshold: f64,
    pub results: Vec<MethodResult>,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == name)
    }
}

fn slot_time(cfg: &RunConfig, slot: usize) -> String {
    let t = cfg.grid.origin_time + slot as i64 * cfg.grid.slot_seconds;
    DateTime::<Utc>::from_timestamp(t, 0)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_default()
}

/// Scores the trained checkpoint and both baselines on the test split.
pub fn eval(cfg: &RunConfig) -> Result<EvalReport> {
    let paths = RunPaths::new(cfg);
    let digest = cfg.digest();
    let ckpt = read_checkpoint(open(&paths.checkpoint, "checkpoint (run `pan train` first)")?)?;
    if ckpt.digest != digest {
        return Err(PanError::Mismatch(format!(
            "checkpoint {} was trained under config digest {}, current config has {digest}",
            paths.checkpoint.display(),
            ckpt.digest
        )));
    }
    let data = Prepared::load(cfg, &paths)?;
    let mut model = build_variant(cfg.model.variant, data.shape(), &cfg.model, &mut init_rng(cfg.seed))?;
    ckpt.load_into(&mut model)?;

    let layout = data.series.layout;
    let range = data.target_range();
    let targets = data.target_slots();
    let truths = data.truths();
    let raw = data.raw_frames();
    let first = data.series.first_slot();
    let thr = cfg.eval.threshold;

    let pan = data.predict_raw(&model, cfg.train.batch_size)?;
    let ha = baseline_ha(&raw[..data.boundary - first], first, &targets, data.window.slots_per_week)?;
    let persistence = baseline_persistence(&raw, first, &targets)?;
    let mut results = Vec::new();
    for (method, preds) in [("pan", pan), ("ha", ha), ("persistence", persistence)] {
        results.push(MethodResult {
            method: method.into(),
            states: evaluate(&preds, &truths, layout, thr, range)?.states,
        });
    }
    let report = EvalReport {
        config_digest: digest,
        variant: cfg.model.variant,
        split_boundary: SplitBoundary {
            slot: data.boundary,
            time: slot_time(cfg, data.boundary),
        },
        range,
        threshold: thr,
        results,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&paths.report, json.as_bytes())?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub state: String,
    pub rmse: Option<f64>,
    pub mape: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trains and scores every variant under identical seeds.
pub fn ablate(cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let paths = RunPaths::new(cfg);
    let data = Prepared::load(cfg, &paths)?;
    let truths = data.truths();
    let mut rows = Vec::new();
    for variant in Variant::ALL {
        let (model, trace) = fit(cfg, &data, variant)?;
        write_file(&paths.variant_loss_csv(variant), trace.to_csv().as_bytes())?;
        let preds = data.predict_raw(&model, cfg.train.batch_size)?;
        let report = evaluate(&preds, &truths, data.series.layout, cfg.eval.threshold, data.target_range())?;
        for s in report.states {
            rows.push(AblationRow {
                variant,
                state: s.state,
                rmse: s.rmse,
                mape: s.mape,
            });
        }
    }
    let mut csv = String::from("variant,state,rmse,mape\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.variant.name(), r.state, opt(r.rmse), opt(r.mape)));
    }
    write_file(&paths.ablation_csv, csv.as_bytes())?;
    Ok(rows)
}
