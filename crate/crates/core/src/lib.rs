//! Position-aware convolutional network for grid-based traffic forecasting.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense NHWC tensors with hand-written forward/backward passes,
//!   Adam and a finite-difference gradient checker.
//! * [`grid`]: trip records to per-timeslot count grids, Min-Max scaling,
//!   train/test splitting and the binary frame archive.
//! * [`window`]: recent/daily/weekly lookback plans and input assembly.
//! * [`model`]: position embeddings, PACu/PAC/PASTI blocks, the full network,
//!   its loss, training loop, ablation variants and checkpoints.
//! * [`metrics`]: filtered per-state RMSE/MAPE and the HA/persistence baselines.
//! * [`pipeline`]: the reproducible `ingest`/`train`/`eval`/`ablate` runs used
//!   by the `pan` binary.

pub mod error;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod tensor;
pub mod window;

pub use error::{PanError, Result};
pub use grid::{FrameSeries, GridLayout, GridSpec, NormStats, TrafficFrame, TripRecord};
pub use metrics::{evaluate, MetricsReport, StateMetrics};
pub use model::{ModelHyper, ModelShape, PanModel, TrainConfig, Variant};
pub use tensor::{ConvKernel, Dims, Mode, Param, Tensor};
pub use window::{WindowConfig, WindowPlan};

/// Seeded random stream used everywhere randomness is needed.
pub type PanRng = rand_chacha::ChaCha8Rng;
