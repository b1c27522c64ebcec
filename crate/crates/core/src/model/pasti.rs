use rand::Rng;

use super::pac::PacBlockCache;
use super::{HasParams, PacBlock, PacSpec, ParamsMut, ParamsRef};
use crate::error::{config_err, Result};
use crate::tensor::{
    concat_channels, dropout, dropout_backward, relu_backward, relu_forward, split_channels, ConvKernel, Mode,
    Tensor,
};

/// Parallel bank of PACs, concatenated, dropped out, merged back to `c_F`
/// channels, ReLU-activated and added to the block input.
#[derive(Clone, Debug, PartialEq)]
pub struct PastiBlock {
    pub pacs: Vec<PacBlock>,
    pub merge: ConvKernel,
    pub dropout_rate: f64,
}

#[derive(Clone, Debug)]
pub struct PastiCache {
    pacs: Vec<PacBlockCache>,
    /// Merge input, i.e. the concat after dropout.
    dropped: Tensor,
    mask: Tensor,
    pre_act: Tensor,
}

impl PastiBlock {
    /// `kinds` lists `(copies, spec)` in concat order.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        channels: usize,
        kinds: &[(usize, PacSpec)],
        dropout_rate: f64,
        merge_gain: f64,
        with_pe: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let mut pacs = Vec::new();
        for &(copies, spec) in kinds {
            for _ in 0..copies {
                pacs.push(PacBlock::new(rows, cols, channels, spec, with_pe, rng)?);
            }
        }
        if pacs.is_empty() {
            return config_err("a PASTI block needs at least one PAC");
        }
        let width = pacs.iter().map(PacBlock::width).sum();
        let merge = ConvKernel::he_init(1, width, channels, merge_gain, rng)?;
        Ok(PastiBlock {
            pacs,
            merge,
            dropout_rate,
        })
    }

    /// Channels entering the merge convolution.
    pub fn concat_width(&self) -> usize {
        self.merge.c_in()
    }

    pub fn channels(&self) -> usize {
        self.merge.c_out()
    }

    /// Residual output `PASTI(F) + F`.
    pub fn forward<R: Rng + ?Sized>(&self, input: &Tensor, mode: Mode, rng: &mut R) -> Result<(Tensor, PastiCache)> {
        if input.dims().c != self.channels() {
            return config_err(format!(
                "PASTI expects {} input channels, got {}",
                self.channels(),
                input.dims().c
            ));
        }
        let mut outs = Vec::with_capacity(self.pacs.len());
        let mut caches = Vec::with_capacity(self.pacs.len());
        for pac in &self.pacs {
            let (y, c) = pac.forward(input)?;
            outs.push(y);
            caches.push(c);
        }
        let refs: Vec<&Tensor> = outs.iter().collect();
        let concat = concat_channels(&refs)?;
        drop(outs);
        let (dropped, mask) = dropout(&concat, self.dropout_rate, mode, rng)?;
        let pre_act = self.merge.forward(&dropped)?;
        let mut out = relu_forward(&pre_act);
        out.add_assign(input)?;
        debug_assert_eq!(out.dims(), input.dims());
        Ok((
            out,
            PastiCache {
                pacs: caches,
                dropped,
                mask,
                pre_act,
            },
        ))
    }

    pub fn backward(&mut self, input: &Tensor, cache: &PastiCache, grad_out: &Tensor) -> Result<Tensor> {
        let g = relu_backward(&cache.pre_act, grad_out)?;
        let g = self.merge.backward(&cache.dropped, &g)?;
        let g = dropout_backward(&cache.mask, &g)?;
        let widths: Vec<usize> = self.pacs.iter().map(PacBlock::width).collect();
        let parts = split_channels(&g, &widths)?;
        // residual path
        let mut grad_in = grad_out.clone();
        for ((pac, c), gp) in self.pacs.iter_mut().zip(&cache.pacs).zip(&parts) {
            grad_in.add_assign(&pac.backward(input, c, gp)?)?;
        }
        Ok(grad_in)
    }
}

impl HasParams for PastiBlock {
    fn collect_params_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamsMut<'a>) {
        for (k, pac) in self.pacs.iter_mut().enumerate() {
            pac.collect_params_mut(&format!("{prefix}.pac{k}"), out);
        }
        self.merge.collect_params_mut(&format!("{prefix}.merge"), out);
    }

    fn collect_params<'a>(&'a self, prefix: &str, out: &mut ParamsRef<'a>) {
        for (k, pac) in self.pacs.iter().enumerate() {
            pac.collect_params(&format!("{prefix}.pac{k}"), out);
        }
        self.merge.collect_params(&format!("{prefix}.merge"), out);
    }
}
