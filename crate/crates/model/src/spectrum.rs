//! In-network band-limited DFT.
//!
//! For a zero-mean image `x` the cropped spectrum is
//! `Re = Cr·x·Ccᵀ − Sr·x·Scᵀ` and `Im = −(Sr·x·Ccᵀ + Cr·x·Scᵀ)`, where the rows
//! of `Cr`/`Sr` (and `Cc`/`Sc`) are cosines and sines at the cropped signed
//! frequencies. The patch layout matches `fpembed_core::preprocess::to_spectrum`.

use std::f64::consts::TAU;

use candle_core::{DType, Device, Tensor};
use fpembed_core::preprocess::{band_len, band_offset, ellipse_mask, shifted_frequency};

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct BandDft {
    cos_r: Tensor,
    sin_r: Tensor,
    cos_c_t: Tensor,
    sin_c_t: Tensor,
    mask: Option<Tensor>,
}

fn basis(n: usize, band: usize, dtype: DType, dev: &Device) -> Result<(Tensor, Tensor)> {
    let off = band_offset(n, band);
    let mut c = Vec::with_capacity(band * n);
    let mut s = Vec::with_capacity(band * n);
    for k in 0..band {
        let u = shifted_frequency(n, off + k);
        for m in 0..n {
            // reduce the product modulo n before scaling to keep the angle exact
            let phase = TAU * ((u * m as isize).rem_euclid(n as isize)) as f64 / n as f64;
            c.push(phase.cos());
            s.push(phase.sin());
        }
    }
    Ok((
        Tensor::from_vec(c, (band, n), dev)?.to_dtype(dtype)?,
        Tensor::from_vec(s, (band, n), dev)?.to_dtype(dtype)?,
    ))
}

impl BandDft {
    pub fn new(side: usize, band_fraction: f64, elliptical: bool, dtype: DType, dev: &Device) -> Result<Self> {
        let band = band_len(side, band_fraction)?;
        let (cos_r, sin_r) = basis(side, band, dtype, dev)?;
        let mask = if elliptical {
            let m = ellipse_mask(band, band);
            Some(Tensor::from_iter(m.iter().copied(), dev)?.reshape((1, 1, band, band))?.to_dtype(dtype)?)
        } else {
            None
        };
        Ok(Self {
            cos_c_t: cos_r.t()?.contiguous()?,
            sin_c_t: sin_r.t()?.contiguous()?,
            cos_r,
            sin_r,
            mask,
        })
    }

    /// `(B, 1, N, N)` image batch to `(B, 2, band, band)` (real, imag). Each
    /// image is made zero-mean first.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (b, _, h, w) = x.dims4()?;
        let x = x.broadcast_sub(&x.mean_keepdim((2, 3))?)?.reshape((b, h, w))?;
        let a = self.cos_r.broadcast_matmul(&x)?;
        let s = self.sin_r.broadcast_matmul(&x)?;
        let real = (a.broadcast_matmul(&self.cos_c_t)? - s.broadcast_matmul(&self.sin_c_t)?)?;
        let imag = (s.broadcast_matmul(&self.cos_c_t)? + a.broadcast_matmul(&self.sin_c_t)?)?.neg()?;
        let patch = Tensor::stack(&[real, imag], 1)?;
        Ok(match &self.mask {
            Some(m) => patch.broadcast_mul(m)?,
            None => patch,
        })
    }
}
