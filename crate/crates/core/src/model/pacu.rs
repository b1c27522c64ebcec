use rand::Rng;

use super::{HasParams, ParamsMut, ParamsRef, PositionEmbedding};
use crate::error::Result;
use crate::tensor::{relu_backward, relu_forward, ConvKernel, Tensor};

/// Position-aware convolution unit: `ReLU(Conv_s(PE(F)))`.
///
/// Without an embedding it degrades to a plain convolution + ReLU, which is
/// what the `no_pac` variant uses.
#[derive(Clone, Debug, PartialEq)]
pub struct PacUnit {
    pub pe: Option<PositionEmbedding>,
    pub conv: ConvKernel,
}

#[derive(Clone, Debug)]
pub struct PacUnitCache {
    /// Convolution input when an embedding shifted it, else the unit input.
    embedded: Option<Tensor>,
    pre_act: Tensor,
}

impl PacUnit {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        c_in: usize,
        size: usize,
        c_out: usize,
        with_pe: bool,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(PacUnit {
            pe: with_pe.then(|| PositionEmbedding::zeros(rows, cols, c_in)),
            conv: ConvKernel::he_init(size, c_in, c_out, 1.0, rng)?,
        })
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, PacUnitCache)> {
        let embedded = self.pe.as_ref().map(|pe| pe.forward(input)).transpose()?;
        let pre_act = self.conv.forward(embedded.as_ref().unwrap_or(input))?;
        let out = relu_forward(&pre_act);
        Ok((out, PacUnitCache { embedded, pre_act }))
    }

    pub fn backward(&mut self, input: &Tensor, cache: &PacUnitCache, grad_out: &Tensor) -> Result<Tensor> {
        let g = relu_backward(&cache.pre_act, grad_out)?;
        let g = self.conv.backward(cache.embedded.as_ref().unwrap_or(input), &g)?;
        if let Some(pe) = self.pe.as_mut() {
            pe.backward(&g);
        }
        Ok(g)
    }
}

impl HasParams for PacUnit {
    fn collect_params_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamsMut<'a>) {
        if let Some(pe) = self.pe.as_mut() {
            pe.collect_params_mut(&format!("{prefix}.pe"), out);
        }
        self.conv.collect_params_mut(&format!("{prefix}.conv"), out);
    }

    fn collect_params<'a>(&'a self, prefix: &str, out: &mut ParamsRef<'a>) {
        if let Some(pe) = self.pe.as_ref() {
            pe.collect_params(&format!("{prefix}.pe"), out);
        }
        self.conv.collect_params(&format!("{prefix}.conv"), out);
    }
}
