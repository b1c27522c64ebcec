//! Dense `(n, h, w, c)` tensors and the layer primitives the network is
//! built from. Every primitive has an explicit adjoint; nothing here builds a
//! graph.

mod activation;
mod adam;
mod conv;
mod dropout;
mod gradcheck;
mod param;

pub use activation::{relu_backward, relu_forward};
pub use adam::{Adam, AdamConfig};
pub use conv::ConvKernel;
pub use dropout::{dropout, dropout_backward, Mode};
pub use gradcheck::{grad_check, GradCheckReport};
pub use param::Param;

use crate::error::{config_err, Result};

/// Shape of a tensor: samples, rows, columns, channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Dims {
    pub const fn new(n: usize, h: usize, w: usize, c: usize) -> Self {
        Dims { n, h, w, c }
    }

    pub fn len(&self) -> usize {
        self.n * self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same spatial extent and sample count; channels may differ.
    pub fn same_nhw(&self, other: &Dims) -> bool {
        self.n == other.n && self.h == other.h && self.w == other.w
    }

    pub fn with_channels(self, c: usize) -> Self {
        Dims { c, ..self }
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.h, self.w, self.c)
    }
}

/// Row-major `(n, h, w, c)` block of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor {
    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(dims: Dims) -> Self {
        Self::full(dims, 0.0)
    }

    pub fn full(dims: Dims, value: f64) -> Self {
        assert!(
            dims.n > 0 && dims.h > 0 && dims.w > 0 && dims.c > 0,
            "tensor dims must all be >= 1, got {dims}"
        );
        Tensor {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if dims.n == 0 || dims.h == 0 || dims.w == 0 || dims.c == 0 {
            return config_err(format!("tensor dims must all be >= 1, got {dims}"));
        }
        if data.len() != dims.len() {
            return config_err(format!(
                "tensor data length {} does not match dims {dims} ({} elements)",
                data.len(),
                dims.len()
            ));
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor::zeros(dims);
        let mut idx = 0;
        for n in 0..dims.n {
            for i in 0..dims.h {
                for j in 0..dims.w {
                    for c in 0..dims.c {
                        t.data[idx] = f(n, i, j, c);
                        idx += 1;
                    }
                }
            }
        }
        t
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, n: usize, i: usize, j: usize, c: usize) -> usize {
        ((n * self.dims.h + i) * self.dims.w + j) * self.dims.c + c
    }

    #[inline]
    pub fn get(&self, n: usize, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.offset(n, i, j, c)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, i: usize, j: usize, c: usize, v: f64) {
        let o = self.offset(n, i, j, c);
        self.data[o] = v;
    }

    /// Channel vector of one cell.
    #[inline]
    pub fn pixel(&self, n: usize, i: usize, j: usize) -> &[f64] {
        let o = self.offset(n, i, j, 0);
        &self.data[o..o + self.dims.c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy of sample `n` as a single-sample tensor.
    pub fn sample(&self, n: usize) -> Tensor {
        let per = self.dims.h * self.dims.w * self.dims.c;
        Tensor {
            dims: Dims { n: 1, ..self.dims },
            data: self.data[n * per..(n + 1) * per].to_vec(),
        }
    }

    /// Stacks tensors along the sample dimension.
    pub fn stack(parts: &[Tensor]) -> Result<Tensor> {
        let Some(first) = parts.first() else {
            return config_err("cannot stack an empty list of tensors");
        };
        let base = first.dims;
        let mut n = 0;
        for p in parts {
            let d = p.dims;
            if (d.h, d.w, d.c) != (base.h, base.w, base.c) {
                return config_err(format!("cannot stack {d} onto {base}"));
            }
            n += d.n;
        }
        let mut data = Vec::with_capacity(n * base.h * base.w * base.c);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            dims: Dims { n, ..base },
            data,
        })
    }

    fn check_congruent(&self, other: &Tensor, op: &str) -> Result<()> {
        if self.dims != other.dims {
            return config_err(format!(
                "{op}: incongruent shapes {} and {}",
                self.dims, other.dims
            ));
        }
        Ok(())
    }

    /// Elementwise sum. `other` may have `n = 1`, in which case it is
    /// broadcast across every sample of `self`.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        let (a, b) = (self.dims, other.dims);
        if a == b {
            self.data
                .iter_mut()
                .zip(&other.data)
                .for_each(|(x, y)| *x += y);
            return Ok(());
        }
        if b.n == 1 && (a.h, a.w, a.c) == (b.h, b.w, b.c) {
            for chunk in self.data.chunks_exact_mut(other.data.len()) {
                chunk.iter_mut().zip(&other.data).for_each(|(x, y)| *x += y);
            }
            return Ok(());
        }
        config_err(format!("add: incongruent shapes {a} and {b}"))
    }

    /// Adjoint of broadcasting a single-sample tensor over `n`: sums the
    /// gradient over samples.
    pub fn sum_samples(&self) -> Tensor {
        let per = self.dims.h * self.dims.w * self.dims.c;
        let mut data = vec![0.0; per];
        for chunk in self.data.chunks_exact(per) {
            data.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
        }
        Tensor {
            dims: Dims { n: 1, ..self.dims },
            data,
        }
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.check_congruent(other, "mul")?;
        Ok(Tensor {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// Adjoint of [`Tensor::mul`]: returns `(grad_self, grad_other)`.
    pub fn mul_backward(&self, other: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_congruent(other, "mul_backward")?;
        self.check_congruent(grad_out, "mul_backward")?;
        Ok((grad_out.mul(other)?, grad_out.mul(self)?))
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        self.map(|v| v * alpha)
    }

    pub fn add_scalar(&self, beta: f64) -> Tensor {
        self.map(|v| v + beta)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Stacks tensors along the channel axis in argument order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let Some(first) = parts.first() else {
        return config_err("concat_channels: no parts");
    };
    let base = first.dims;
    let mut c_total = 0;
    for p in parts {
        if !p.dims.same_nhw(&base) {
            return config_err(format!(
                "concat_channels: spatial mismatch {} vs {}",
                p.dims, base
            ));
        }
        c_total += p.dims.c;
    }
    let cells = base.n * base.h * base.w;
    let mut data = Vec::with_capacity(cells * c_total);
    for cell in 0..cells {
        for p in parts {
            let c = p.dims.c;
            data.extend_from_slice(&p.data[cell * c..(cell + 1) * c]);
        }
    }
    Ok(Tensor {
        dims: base.with_channels(c_total),
        data,
    })
}

/// Adjoint of [`concat_channels`]: slices `t` into consecutive channel
/// groups of the given widths.
pub fn split_channels(t: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>> {
    let total: usize = widths.iter().sum();
    if total != t.dims.c || widths.iter().any(|&w| w == 0) {
        return config_err(format!(
            "split_channels: widths {widths:?} do not partition {} channels",
            t.dims.c
        ));
    }
    let cells = t.dims.n * t.dims.h * t.dims.w;
    let mut outs: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(cells * w)).collect();
    for px in t.data.chunks_exact(total) {
        let mut start = 0;
        for (out, &w) in outs.iter_mut().zip(widths) {
            out.extend_from_slice(&px[start..start + w]);
            start += w;
        }
    }
    Ok(outs
        .into_iter()
        .zip(widths)
        .map(|(data, &w)| Tensor {
            dims: t.dims.with_channels(w),
            data,
        })
        .collect())
}
