use rand::{Rng, SeedableRng};

use super::pacu::PacUnitCache;
use super::pasti::PastiCache;
use super::{HasParams, ModelHyper, ModelShape, PacUnit, ParamsMut, ParamsRef, PastiBlock, PositionEmbedding, Variant};
use crate::error::{config_err, Result};
use crate::tensor::{ConvKernel, Mode, Param, Tensor};
use crate::PanRng;

/// Initial output of every head channel, in normalized units.
pub const HEAD_INIT_BIAS: f64 = 0.1;

/// Stem `Conv_1` to `c_F`, a residual PASTI stack and a `PACu(1, K)` head.
#[derive(Clone, Debug, PartialEq)]
pub struct PanModel {
    shape: ModelShape,
    hyper: ModelHyper,
    pub input_pe: Option<PositionEmbedding>,
    pub stem: ConvKernel,
    pub blocks: Vec<PastiBlock>,
    pub head: PacUnit,
}

/// Activations kept from a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: Tensor,
    /// Stem input after the optional input embedding.
    embedded: Option<Tensor>,
    /// `feats[0]` is the stem output, `feats[b + 1]` the output of block `b`.
    feats: Vec<Tensor>,
    blocks: Vec<PastiCache>,
    head: PacUnitCache,
}

impl PanModel {
    pub fn new<R: Rng + ?Sized>(shape: ModelShape, hyper: &ModelHyper, rng: &mut R) -> Result<Self> {
        hyper.validate()?;
        if shape.rows == 0 || shape.cols == 0 || shape.states == 0 || shape.input_channels == 0 {
            return config_err(format!("model shape must be non-empty, got {shape:?}"));
        }
        let with_pe = hyper.variant != Variant::NoPac;
        let kinds = hyper.pac_kinds()?;
        let c_f = hyper.feature_channels;
        let (rows, cols) = (shape.rows, shape.cols);

        let input_pe = (hyper.input_pe && with_pe).then(|| PositionEmbedding::zeros(rows, cols, shape.input_channels));
        let stem = ConvKernel::he_init(1, shape.input_channels, c_f, 1.0, rng)?;
        let blocks = (0..hyper.pasti_blocks)
            .map(|_| PastiBlock::new(rows, cols, c_f, &kinds, hyper.dropout, hyper.merge_init_gain, with_pe, rng))
            .collect::<Result<Vec<_>>>()?;
        let mut head = PacUnit::new(rows, cols, c_f, 1, shape.states, with_pe, rng)?;
        // A He-initialised head can start with a negative pre-activation in
        // every cell, leaving the output ReLU closed and the network without
        // gradient. A constant positive output keeps it open.
        head.conv.weight.value.fill(0.0);
        head.conv.bias.value.fill(HEAD_INIT_BIAS);
        Ok(PanModel {
            shape,
            hyper: hyper.clone(),
            input_pe,
            stem,
            blocks,
            head,
        })
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn hyper(&self) -> &ModelHyper {
        &self.hyper
    }

    pub fn variant(&self) -> Variant {
        self.hyper.variant
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let d = x.dims();
        if d.c != self.shape.input_channels {
            return config_err(format!(
                "model expects {} input channels, got {}",
                self.shape.input_channels, d.c
            ));
        }
        if (d.h, d.w) != (self.shape.rows, self.shape.cols) {
            return config_err(format!(
                "model expects a {}x{} grid, got {}x{}",
                self.shape.rows, self.shape.cols, d.h, d.w
            ));
        }
        Ok(())
    }

    /// Output `(n, I, J, K)`, elementwise non-negative.
    pub fn forward<R: Rng + ?Sized>(&self, x: &Tensor, mode: Mode, rng: &mut R) -> Result<(Tensor, ForwardCache)> {
        self.check_input(x)?;
        let embedded = self.input_pe.as_ref().map(|pe| pe.forward(x)).transpose()?;
        let mut feats = vec![self.stem.forward(embedded.as_ref().unwrap_or(x))?];
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, c) = block.forward(feats.last().unwrap(), mode, rng)?;
            feats.push(y);
            caches.push(c);
        }
        let (out, head) = self.head.forward(feats.last().unwrap())?;
        Ok((
            out,
            ForwardCache {
                input: x.clone(),
                embedded,
                feats,
                blocks: caches,
                head,
            },
        ))
    }

    /// Eval-mode forward pass without a cache.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        // dropout is inert in eval mode, so the rng is never drawn from
        let mut unused = PanRng::seed_from_u64(0);
        let embedded = self.input_pe.as_ref().map(|pe| pe.forward(x)).transpose()?;
        let mut f = self.stem.forward(embedded.as_ref().unwrap_or(x))?;
        for block in &self.blocks {
            f = block.forward(&f, Mode::Eval, &mut unused)?.0;
        }
        Ok(self.head.forward(&f)?.0)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &ForwardCache, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = self.head.backward(cache.feats.last().unwrap(), &cache.head, grad_out)?;
        for (b, block) in self.blocks.iter_mut().enumerate().rev() {
            g = block.backward(&cache.feats[b], &cache.blocks[b], &g)?;
        }
        let g = self.stem.backward(cache.embedded.as_ref().unwrap_or(&cache.input), &g)?;
        if let Some(pe) = self.input_pe.as_mut() {
            pe.backward(&g);
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<(String, &Param)> {
        let mut out = Vec::new();
        self.collect_params("", &mut out);
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        self.collect_params_mut("", &mut out);
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Parameters held by position embeddings.
    pub fn num_pe_params(&self) -> usize {
        self.params()
            .iter()
            .filter(|(n, _)| n.ends_with(".pe") || n == "input_pe")
            .map(|(_, p)| p.len())
            .sum()
    }
}

impl HasParams for PanModel {
    fn collect_params_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamsMut<'a>) {
        let p = |s: &str| join(prefix, s);
        if let Some(pe) = self.input_pe.as_mut() {
            pe.collect_params_mut(&p("input_pe"), out);
        }
        self.stem.collect_params_mut(&p("stem"), out);
        for (b, block) in self.blocks.iter_mut().enumerate() {
            block.collect_params_mut(&p(&format!("blocks.{b}")), out);
        }
        self.head.collect_params_mut(&p("head"), out);
    }

    fn collect_params<'a>(&'a self, prefix: &str, out: &mut ParamsRef<'a>) {
        let p = |s: &str| join(prefix, s);
        if let Some(pe) = self.input_pe.as_ref() {
            pe.collect_params(&p("input_pe"), out);
        }
        self.stem.collect_params(&p("stem"), out);
        for (b, block) in self.blocks.iter().enumerate() {
            block.collect_params(&p(&format!("blocks.{b}")), out);
        }
        self.head.collect_params(&p("head"), out);
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Builds one of the ablation variants; every other hyper-parameter is kept.
pub fn build_variant<R: Rng + ?Sized>(
    kind: Variant,
    shape: ModelShape,
    hyper: &ModelHyper,
    rng: &mut R,
) -> Result<PanModel> {
    let hyper = ModelHyper { variant: kind, ..hyper.clone() };
    PanModel::new(shape, &hyper, rng)
}
