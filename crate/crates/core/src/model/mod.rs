//! The position-aware network.
//!
//! ```text
//! input -> [PE] -> stem Conv1 -> PASTI x B (each with residual) -> PACu(1, K)
//! PASTI(F) = ReLU(Conv1(Dropout(Concat(PAC_1..PAC_n)(F)))) + F
//! PAC(m, s, c) = Conv1 -> m x PACu(s, c) -> Conv1
//! PACu(s, c)   = ReLU(Conv_s(PE(F)))
//! ```

mod checkpoint;
mod embedding;
mod loss;
mod network;
mod pac;
mod pasti;
mod pacu;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, ManifestEntry, CHECKPOINT_MAGIC};
pub use embedding::PositionEmbedding;
pub use loss::loss;
pub use network::{build_variant, ForwardCache, PanModel};
pub use pac::PacBlock;
pub use pacu::PacUnit;
pub use pasti::PastiBlock;
pub use train::{predict_anchors, train, TrainConfig, TrainTrace};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, PanError, Result};
use crate::tensor::{ConvKernel, Param};

/// Architecture variants compared in the ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Every PACu carries its own position embedding.
    Full,
    /// Position embeddings removed: plain convolution + ReLU units.
    NoPac,
    /// Only the deepest PAC kind, widened to keep the concat width.
    OnePac,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoPac, Variant::OnePac];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoPac => "no_pac",
            Variant::OnePac => "one_pac",
        }
    }
}

impl FromStr for Variant {
    type Err = PanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "no_pac" => Ok(Variant::NoPac),
            "one_pac" => Ok(Variant::OnePac),
            other => config_err(format!(
                "unknown model variant `{other}` (expected full, no_pac or one_pac)"
            )),
        }
    }
}

/// Hyper-parameters of the network. Defaults are the full-scale settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelHyper {
    /// Number of PASTI blocks.
    pub pasti_blocks: usize,
    /// Channels carried between PASTI blocks (`c_F`).
    pub feature_channels: usize,
    /// Copies of PAC(1, 1, c0), PAC(1, 3, c1) and PAC(2, 3, c2) per block.
    pub n0: usize,
    pub n1: usize,
    pub n2: usize,
    pub c0: usize,
    pub c1: usize,
    pub c2: usize,
    /// Dropout rate at the PASTI concat.
    pub dropout: f64,
    pub variant: Variant,
    /// Add a position embedding to the raw input before the stem.
    pub input_pe: bool,
    /// Scale of the He-initialised PASTI merge convolutions; 0 makes every
    /// block an exact identity at initialisation.
    pub merge_init_gain: f64,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            pasti_blocks: 10,
            feature_channels: 256,
            n0: 1,
            n1: 4,
            n2: 4,
            c0: 256,
            c1: 16,
            c2: 16,
            dropout: 0.5,
            variant: Variant::Full,
            input_pe: false,
            merge_init_gain: 0.1,
        }
    }
}

impl ModelHyper {
    /// Concat width of the full three-kind PASTI.
    pub fn concat_width(&self) -> usize {
        self.n0 * self.c0 + self.n1 * self.c1 + self.n2 * self.c2
    }

    /// `(copies, spec)` for every PAC kind of one PASTI under `variant`.
    pub fn pac_kinds(&self) -> Result<Vec<(usize, PacSpec)>> {
        let deep = PacSpec { depth: 2, size: 3, width: self.c2 };
        match self.variant {
            Variant::Full | Variant::NoPac => Ok([
                (self.n0, PacSpec { depth: 1, size: 1, width: self.c0 }),
                (self.n1, PacSpec { depth: 1, size: 3, width: self.c1 }),
                (self.n2, deep),
            ]
            .into_iter()
            .filter(|(n, _)| *n > 0)
            .collect()),
            Variant::OnePac => {
                let width = self.concat_width();
                if self.c2 == 0 || width % self.c2 != 0 {
                    return config_err(format!(
                        "one_pac needs the concat width {width} to be a multiple of c2 = {}",
                        self.c2
                    ));
                }
                Ok(vec![(width / self.c2, deep)])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_channels == 0 {
            return config_err("feature_channels must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return config_err(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.concat_width() == 0 {
            return config_err("a PASTI block needs at least one PAC");
        }
        for (_, spec) in self.pac_kinds()? {
            if spec.width == 0 {
                return config_err("PAC filter counts must be >= 1");
            }
        }
        if !self.merge_init_gain.is_finite() {
            return config_err("merge_init_gain must be finite");
        }
        Ok(())
    }
}

/// Data-dependent dimensions of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub rows: usize,
    pub cols: usize,
    /// Output state channels `K`.
    pub states: usize,
    pub input_channels: usize,
}

/// One PAC kind: `depth` PACu layers of kernel `size` and `width` filters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacSpec {
    pub depth: usize,
    pub size: usize,
    pub width: usize,
}

pub(crate) type ParamsMut<'a> = Vec<(String, &'a mut Param)>;
pub(crate) type ParamsRef<'a> = Vec<(String, &'a Param)>;

/// Named access to learnable arrays, in declaration order.
pub trait HasParams {
    fn collect_params_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamsMut<'a>);
    fn collect_params<'a>(&'a self, prefix: &str, out: &mut ParamsRef<'a>);

    fn zero_grads(&mut self) {
        let mut ps = Vec::new();
        self.collect_params_mut("", &mut ps);
        ps.into_iter().for_each(|(_, p)| p.zero_grad());
    }
}

impl HasParams for ConvKernel {
    fn collect_params_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamsMut<'a>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }

    fn collect_params<'a>(&'a self, prefix: &str, out: &mut ParamsRef<'a>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }
}
