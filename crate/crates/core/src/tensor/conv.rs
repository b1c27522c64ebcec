use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{Param, Tensor};
use crate::error::{config_err, Result};

/// Below this many multiply-adds a convolution runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 15;

/// Stride-1, zero same-padded 2D convolution kernel.
///
/// Weights are laid out `(c_out, s, s, c_in)`, so the `c_in` run for a fixed
/// `(o, di, dj)` is contiguous and lines up with an NHWC pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    size: usize,
    c_in: usize,
    c_out: usize,
    pub weight: Param,
    pub bias: Param,
}

impl ConvKernel {
    /// All-zero kernel.
    pub fn zeros(size: usize, c_in: usize, c_out: usize) -> Result<Self> {
        if size % 2 == 0 {
            return config_err(format!("kernel size must be odd, got {size}"));
        }
        if c_in == 0 || c_out == 0 {
            return config_err(format!(
                "kernel channels must be >= 1, got c_in={c_in} c_out={c_out}"
            ));
        }
        Ok(ConvKernel {
            size,
            c_in,
            c_out,
            weight: Param::zeros(&[c_out, size, size, c_in]),
            bias: Param::zeros(&[c_out]),
        })
    }

    /// Fan-in scaled normal weights, `std = gain * sqrt(2 / (s*s*c_in))`,
    /// zero bias. `gain = 0` yields an all-zero kernel.
    pub fn he_init<R: Rng + ?Sized>(
        size: usize,
        c_in: usize,
        c_out: usize,
        gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut k = Self::zeros(size, c_in, c_out)?;
        if gain != 0.0 {
            let std = gain * (2.0 / (size * size * c_in) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            k.weight.value.iter_mut().for_each(|w| *w = normal.sample(rng));
        }
        Ok(k)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn zero_grad(&mut self) {
        self.weight.zero_grad();
        self.bias.zero_grad();
    }

    #[inline]
    fn taps(&self, o: usize, di: usize, dj: usize) -> &[f64] {
        let start = ((o * self.size + di) * self.size + dj) * self.c_in;
        &self.weight.value[start..start + self.c_in]
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.dims().c != self.c_in {
            return config_err(format!(
                "conv channel mismatch: input has {} channels, kernel expects {}",
                input.dims().c,
                self.c_in
            ));
        }
        Ok(())
    }

    fn work(&self, input: &Tensor) -> usize {
        let d = input.dims();
        d.n * d.h * d.w * self.c_out * self.size * self.size * self.c_in
    }

    /// `out[n,i,j,o] = b[o] + sum_{di,dj,ci} W[o,di,dj,ci] * x[n, i+di-p, j+dj-p, ci]`
    /// with `p = (s-1)/2` and zeros outside the grid.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let d = input.dims();
        let mut out = Tensor::zeros(d.with_channels(self.c_out));
        let row_len = d.w * self.c_out;
        let row = |(row_idx, out_row): (usize, &mut [f64])| {
            let (n, i) = (row_idx / d.h, row_idx % d.h);
            self.forward_row(input, n, i, out_row);
        };
        if self.work(input) >= PAR_THRESHOLD {
            out.data_mut()
                .par_chunks_mut(row_len)
                .enumerate()
                .for_each(row);
        } else {
            out.data_mut().chunks_mut(row_len).enumerate().for_each(row);
        }
        Ok(out)
    }

    fn forward_row(&self, input: &Tensor, n: usize, i: usize, out_row: &mut [f64]) {
        let d = input.dims();
        let pad = self.size / 2;
        for (j, px) in out_row.chunks_mut(self.c_out).enumerate() {
            px.copy_from_slice(&self.bias.value);
            for di in 0..self.size {
                let Some(ii) = (i + di).checked_sub(pad).filter(|&ii| ii < d.h) else {
                    continue;
                };
                for dj in 0..self.size {
                    let Some(jj) = (j + dj).checked_sub(pad).filter(|&jj| jj < d.w) else {
                        continue;
                    };
                    let x = input.pixel(n, ii, jj);
                    for (o, acc) in px.iter_mut().enumerate() {
                        *acc += dot(self.taps(o, di, dj), x);
                    }
                }
            }
        }
    }

    /// Returns the gradient with respect to `input` and accumulates weight
    /// and bias gradients into the kernel.
    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let d = input.dims();
        if grad_out.dims() != d.with_channels(self.c_out) {
            return config_err(format!(
                "conv backward: grad_out {} does not match forward output {}",
                grad_out.dims(),
                d.with_channels(self.c_out)
            ));
        }
        let parallel = self.work(input) >= PAR_THRESHOLD;

        let mut grad_in = Tensor::zeros(d);
        let row_len = d.w * self.c_in;
        {
            let this = &*self;
            let row = |(row_idx, gi_row): (usize, &mut [f64])| {
                let (n, ii) = (row_idx / d.h, row_idx % d.h);
                this.grad_input_row(grad_out, n, ii, gi_row);
            };
            if parallel {
                grad_in
                    .data_mut()
                    .par_chunks_mut(row_len)
                    .enumerate()
                    .for_each(row);
            } else {
                grad_in.data_mut().chunks_mut(row_len).enumerate().for_each(row);
            }
        }

        let (size, c_in) = (self.size, self.c_in);
        let per_out = size * size * c_in;
        let filter = |(o, (gw, gb)): (usize, (&mut [f64], &mut f64))| {
            accumulate_filter_grad(input, grad_out, o, size, gw, gb);
        };
        if parallel {
            self.weight
                .grad
                .par_chunks_mut(per_out)
                .zip(self.bias.grad.par_iter_mut())
                .enumerate()
                .for_each(filter);
        } else {
            self.weight
                .grad
                .chunks_mut(per_out)
                .zip(self.bias.grad.iter_mut())
                .enumerate()
                .for_each(filter);
        }
        Ok(grad_in)
    }

    fn grad_input_row(&self, grad_out: &Tensor, n: usize, ii: usize, gi_row: &mut [f64]) {
        let d = grad_out.dims();
        let pad = self.size / 2;
        for (jj, gi) in gi_row.chunks_mut(self.c_in).enumerate() {
            for di in 0..self.size {
                // output row i reads input row ii when ii = i + di - pad
                let Some(i) = (ii + pad).checked_sub(di).filter(|&i| i < d.h) else {
                    continue;
                };
                for dj in 0..self.size {
                    let Some(j) = (jj + pad).checked_sub(dj).filter(|&j| j < d.w) else {
                        continue;
                    };
                    let g = grad_out.pixel(n, i, j);
                    for (o, &go) in g.iter().enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        for (acc, &w) in gi.iter_mut().zip(self.taps(o, di, dj)) {
                            *acc += go * w;
                        }
                    }
                }
            }
        }
    }
}

fn accumulate_filter_grad(
    input: &Tensor,
    grad_out: &Tensor,
    o: usize,
    size: usize,
    gw: &mut [f64],
    gb: &mut f64,
) {
    let d = input.dims();
    let pad = size / 2;
    let c_in = d.c;
    for n in 0..d.n {
        for i in 0..d.h {
            for j in 0..d.w {
                let go = grad_out.get(n, i, j, o);
                if go == 0.0 {
                    continue;
                }
                *gb += go;
                for di in 0..size {
                    let Some(ii) = (i + di).checked_sub(pad).filter(|&ii| ii < d.h) else {
                        continue;
                    };
                    for dj in 0..size {
                        let Some(jj) = (j + dj).checked_sub(pad).filter(|&jj| jj < d.w) else {
                            continue;
                        };
                        let start = (di * size + dj) * c_in;
                        let x = input.pixel(n, ii, jj);
                        for (acc, &xv) in gw[start..start + c_in].iter_mut().zip(x) {
                            *acc += go * xv;
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
