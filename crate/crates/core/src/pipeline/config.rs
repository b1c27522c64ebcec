use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{config_err, PanError, Result};
use crate::grid::GridSpec;
use crate::model::{ModelHyper, TrainConfig};
use crate::window::WindowConfig;

/// Lookback sizes; the slot periods come from the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSettings {
    pub recent: usize,
    pub days: usize,
    pub weeks: usize,
}

impl Default for WindowSettings {
    fn default() -> Self {
        WindowSettings { recent: 5, days: 2, weeks: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Whole days from the first slot that form the training portion.
    pub train_days: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_days: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Samples whose true raw count is below this are not scored.
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { threshold: 10.0 }
    }
}

/// Input and output locations. Relative paths are taken relative to the
/// directory holding the config file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Trip CSV consumed by `ingest`.
    #[serde(default)]
    pub trips: Option<PathBuf>,
    /// Parent of the per-config run directories.
    pub runs_root: PathBuf,
    /// Override for the frame archive location.
    #[serde(default)]
    pub archive: Option<PathBuf>,
    /// Override for the checkpoint location.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Override for the evaluation report location.
    #[serde(default)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridSpec,
    pub window: WindowSettings,
    pub model: ModelHyper,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

/// Preset the config file is layered over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scale {
    /// Small grid and network, few epochs, larger step size.
    Desk,
    /// Full-scale grid, window and network.
    #[default]
    Paper,
}

impl FromStr for Scale {
    type Err = PanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => config_err(format!("unknown scale `{other}` (expected desk or paper)")),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

impl Scale {
    /// The preset as a JSON document; `seed` and `paths.trips` are never
    /// preset.
    pub fn preset(self) -> Value {
        let full = ModelHyper::default();
        // A 0.09 x 0.236 degree box is roughly 10 km x 20 km at New York's
        // latitude, i.e. 1 km cells on the 10 x 20 grid.
        let mut v = json!({
            "grid": {
                "lat_min": 40.69, "lat_max": 40.78,
                "lon_min": -74.02, "lon_max": -73.784,
                "rows": 10, "cols": 20,
                "slot_seconds": 1800,
                "origin_time": "2015-01-01T00:00:00Z",
                "num_slots": 60 * 48,
            },
            "window": WindowSettings::default(),
            "model": full,
            "train": TrainConfig::default(),
            "split": SplitConfig::default(),
            "eval": EvalConfig::default(),
            "paths": { "runs_root": "runs" },
        });
        if self == Scale::Desk {
            merge(
                &mut v,
                json!({
                    "grid": { "rows": 5, "cols": 10, "num_slots": 21 * 48 },
                    "window": { "recent": 3, "days": 1, "weeks": 1 },
                    "model": {
                        "pasti_blocks": 2, "feature_channels": 16,
                        "n0": 1, "n1": 2, "n2": 2, "c0": 16, "c1": 4, "c2": 4,
                    },
                    "train": { "epochs": 10, "lr": 1e-3 },
                    "split": { "train_days": 14 },
                }),
            );
        }
        v
    }
}

/// Recursive object merge; anything that is not an object on both sides is
/// replaced by `over`.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl RunConfig {
    /// Layers `overrides` over the preset, applies the seed override and
    /// validates. Relative paths are resolved against `base_dir`.
    pub fn from_value(overrides: Value, scale: Scale, seed: Option<u64>, base_dir: &Path) -> Result<Self> {
        if !overrides.is_object() {
            return config_err("config must be a JSON object");
        }
        let mut v = scale.preset();
        merge(&mut v, overrides);
        if let Some(seed) = seed {
            v["seed"] = json!(seed);
        }
        if v.get("seed").is_none_or(Value::is_null) {
            return config_err("`seed` is mandatory: set it in the config file or pass --seed");
        }
        let mut cfg: RunConfig = serde_json::from_value(v).map_err(|e| PanError::Config(e.to_string()))?;
        cfg.paths.resolve(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, scale: Scale, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PanError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| PanError::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_value(value, scale, seed, dir)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.window()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.split.train_days == 0 {
            return config_err("split.train_days must be >= 1");
        }
        if self.eval.threshold.is_nan() {
            return config_err("eval.threshold must be a number");
        }
        Ok(())
    }

    pub fn slots_per_day(&self) -> Result<usize> {
        self.grid.slots_per_day().ok_or_else(|| {
            PanError::Config(format!(
                "slot_seconds ({}) must divide a day evenly",
                self.grid.slot_seconds
            ))
        })
    }

    pub fn window(&self) -> Result<WindowConfig> {
        let w = self.window;
        WindowConfig::new(w.recent, w.days, w.weeks, self.slots_per_day()?)
    }

    /// First test slot.
    pub fn split_boundary(&self) -> Result<usize> {
        Ok(self.split.train_days * self.slots_per_day()?)
    }

    /// SHA-256 over everything that determines the archive, the trained
    /// parameters and the test split: seed, grid, window, model, training
    /// and split settings. Paths and the metric threshold are excluded.
    pub fn digest(&self) -> String {
        let scope = json!({
            "seed": self.seed,
            "grid": self.grid,
            "window": self.window,
            "model": self.model,
            "train": self.train,
            "split": self.split,
        });
        hex::encode(Sha256::digest(scope.to_string().as_bytes()))
    }
}

impl PathsConfig {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.runs_root);
        for p in [&mut self.trips, &mut self.archive, &mut self.checkpoint, &mut self.report]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }
}
