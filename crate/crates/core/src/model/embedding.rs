use super::{HasParams, ParamsMut, ParamsRef};
use crate::error::{config_err, Result};
use crate::tensor::{Dims, Param, Tensor};

/// Learnable per-cell vectors added to a feature map, `F + E`.
///
/// The grid has shape `(1, I, J, c)` and is broadcast over samples.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionEmbedding {
    pub grid: Param,
    dims: Dims,
}

impl PositionEmbedding {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        let dims = Dims::new(1, rows, cols, channels);
        PositionEmbedding {
            grid: Param::zeros(&[1, rows, cols, channels]),
            dims,
        }
    }

    pub fn channels(&self) -> usize {
        self.dims.c
    }

    pub fn as_tensor(&self) -> Tensor {
        Tensor::from_vec(self.dims, self.grid.value.clone()).expect("embedding dims")
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let d = input.dims();
        if (d.h, d.w, d.c) != (self.dims.h, self.dims.w, self.dims.c) {
            return config_err(format!(
                "position embedding {} does not fit features {d} (channel mismatch: {} vs {})",
                self.dims, d.c, self.dims.c
            ));
        }
        input.add(&self.as_tensor())
    }

    /// Accumulates the sample-sum of `grad_out`; the gradient with respect to
    /// the features is `grad_out` itself.
    pub fn backward(&mut self, grad_out: &Tensor) {
        let summed = grad_out.sum_samples();
        self.grid
            .grad
            .iter_mut()
            .zip(summed.data())
            .for_each(|(g, s)| *g += s);
    }
}

impl HasParams for PositionEmbedding {
    fn collect_params_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamsMut<'a>) {
        out.push((prefix.to_string(), &mut self.grid));
    }

    fn collect_params<'a>(&'a self, prefix: &str, out: &mut ParamsRef<'a>) {
        out.push((prefix.to_string(), &self.grid));
    }
}
