use rand::Rng;

use super::pacu::PacUnitCache;
use super::{HasParams, PacSpec, PacUnit, ParamsMut, ParamsRef};
use crate::error::{config_err, Result};
use crate::tensor::{ConvKernel, Tensor};

/// `Conv_1 -> depth x PACu(s, c) -> Conv_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PacBlock {
    pub entry: ConvKernel,
    pub units: Vec<PacUnit>,
    pub exit: ConvKernel,
}

#[derive(Clone, Debug)]
pub struct PacBlockCache {
    /// `acts[0]` is the entry output, `acts[k + 1]` the output of unit `k`.
    acts: Vec<Tensor>,
    units: Vec<PacUnitCache>,
}

impl PacBlock {
    pub fn new<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        c_in: usize,
        spec: PacSpec,
        with_pe: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if spec.depth == 0 {
            return config_err("a PAC needs at least one PACu (depth >= 1)");
        }
        let c = spec.width;
        let entry = ConvKernel::he_init(1, c_in, c, 1.0, rng)?;
        let units = (0..spec.depth)
            .map(|_| PacUnit::new(rows, cols, c, spec.size, c, with_pe, rng))
            .collect::<Result<Vec<_>>>()?;
        let exit = ConvKernel::he_init(1, c, c, 1.0, rng)?;
        Ok(PacBlock { entry, units, exit })
    }

    pub fn width(&self) -> usize {
        self.exit.c_out()
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, PacBlockCache)> {
        let mut acts = vec![self.entry.forward(input)?];
        let mut caches = Vec::with_capacity(self.units.len());
        for unit in &self.units {
            let (y, c) = unit.forward(acts.last().unwrap())?;
            acts.push(y);
            caches.push(c);
        }
        let out = self.exit.forward(acts.last().unwrap())?;
        Ok((out, PacBlockCache { acts, units: caches }))
    }

    pub fn backward(&mut self, input: &Tensor, cache: &PacBlockCache, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = self.exit.backward(cache.acts.last().unwrap(), grad_out)?;
        for (k, unit) in self.units.iter_mut().enumerate().rev() {
            g = unit.backward(&cache.acts[k], &cache.units[k], &g)?;
        }
        self.entry.backward(input, &g)
    }
}

impl HasParams for PacBlock {
    fn collect_params_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamsMut<'a>) {
        self.entry.collect_params_mut(&format!("{prefix}.entry"), out);
        for (k, u) in self.units.iter_mut().enumerate() {
            u.collect_params_mut(&format!("{prefix}.unit{k}"), out);
        }
        self.exit.collect_params_mut(&format!("{prefix}.exit"), out);
    }

    fn collect_params<'a>(&'a self, prefix: &str, out: &mut ParamsRef<'a>) {
        self.entry.collect_params(&format!("{prefix}.entry"), out);
        for (k, u) in self.units.iter().enumerate() {
            u.collect_params(&format!("{prefix}.unit{k}"), out);
        }
        self.exit.collect_params(&format!("{prefix}.exit"), out);
    }
}
