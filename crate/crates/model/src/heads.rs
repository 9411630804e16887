//! Texture pooling heads and the minutia-derived attention mask.

use candle_core::{Tensor, D};
use fpembed_core::raster::{linear_taps, SampleGrid};

use crate::error::Result;
use crate::layers::{global_average_pool, Linear};
use crate::params::ParamStore;

/// `t_tex = GAP(X_L) · W_FC`.
#[derive(Debug, Clone)]
pub struct GapHead {
    fc: Linear,
}

impl GapHead {
    pub fn new(p: &mut ParamStore, c_l: usize, k: usize) -> Result<Self> {
        Ok(Self {
            fc: Linear::new(p, "texture.gap_fc", c_l, k, false)?,
        })
    }

    pub fn forward(&self, x_l: &Tensor) -> Result<Tensor> {
        self.fc.forward(&global_average_pool(x_l)?)
    }
}

/// Spatial softmax per channel: `(B, C, H, W)` with each `(b, c)` plane
/// summing to one.
pub fn spatial_softmax(z: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = z.dims4()?;
    let y = candle_nn::ops::softmax(&z.reshape((b, c, h * w))?, D::Minus1)?;
    Ok(y.reshape((b, c, h, w))?)
}

/// `MA_c = Σ_ij A_ij · Y_c,ij` for `y` of shape `(B, C, H, W)` and a mask of
/// shape `(B, H, W)`; returns `(B, C)`.
pub fn attention_pool(y: &Tensor, mask: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = y.dims4()?;
    let y = y.reshape((b, c, h * w))?;
    let a = mask.reshape((b, h * w, 1))?;
    Ok(y.matmul(&a)?.reshape((b, c))?)
}

/// Minutia attention module: 1×1 projection to `C'` spatial logits, spatial
/// softmax, mask-weighted pooling, then `W_FC: C' → K`.
#[derive(Debug, Clone)]
pub struct MamHead {
    proj: Tensor,
    fc: Linear,
}

pub struct MamOutput {
    pub feature: Tensor,
    /// Softmax logits `Y`, `(B, C', H_L, W_L)`.
    pub y: Tensor,
    /// Pooled vector `MA`, `(B, C')`.
    pub ma: Tensor,
}

impl MamHead {
    pub fn new(p: &mut ParamStore, c_l: usize, classes: usize, k: usize) -> Result<Self> {
        Ok(Self {
            proj: p.he("mam.proj.weight", &[classes, c_l, 1, 1], c_l)?,
            fc: Linear::new(p, "mam.fc", classes, k, false)?,
        })
    }

    pub fn logits(&self, x_l: &Tensor) -> Result<Tensor> {
        Ok(x_l.conv2d(&self.proj, 0, 1, 1, 1)?)
    }

    pub fn forward(&self, x_l: &Tensor, mask: &Tensor) -> Result<MamOutput> {
        let y = spatial_softmax(&self.logits(x_l)?)?;
        let ma = attention_pool(&y, mask)?;
        Ok(MamOutput {
            feature: self.fc.forward(&ma)?,
            y,
            ma,
        })
    }

    pub fn fc(&self) -> &Linear {
        &self.fc
    }
}

/// Differentiable attention mask from a batch of maps `(B, C, S, S)`:
/// channel max, half-pixel bilinear resize to `target`, clamp at zero, and
/// normalization to unit sum. All-zero maps give the uniform mask.
#[derive(Debug, Clone)]
pub struct MaskBuilder {
    rows: Tensor,
    cols_t: Tensor,
    target: (usize, usize),
}

fn resize_matrix(src: usize, dst: usize) -> Vec<f64> {
    let mut m = vec![0.0; dst * src];
    for (d, (lo, hi, f)) in linear_taps(src, dst, SampleGrid::HalfPixel).into_iter().enumerate() {
        m[d * src + lo] += 1.0 - f;
        m[d * src + hi] += f;
    }
    m
}

impl MaskBuilder {
    pub fn new(map_side: usize, target: (usize, usize), dtype: candle_core::DType, dev: &candle_core::Device) -> Result<Self> {
        let rows = Tensor::from_vec(resize_matrix(map_side, target.0), (target.0, map_side), dev)?.to_dtype(dtype)?;
        let cols = Tensor::from_vec(resize_matrix(map_side, target.1), (target.1, map_side), dev)?.to_dtype(dtype)?;
        Ok(Self {
            rows,
            cols_t: cols.t()?.contiguous()?,
            target,
        })
    }

    pub fn forward(&self, maps: &Tensor) -> Result<Tensor> {
        let (b, _, _, _) = maps.dims4()?;
        let (th, tw) = self.target;
        let collapsed = maps.max(1)?;
        let resized = self.rows.broadcast_matmul(&collapsed)?.broadcast_matmul(&self.cols_t)?.relu()?;
        let total = resized.sum_keepdim((1, 2))?;
        let totals: Vec<f64> = total.to_dtype(candle_core::DType::F64)?.flatten_all()?.to_vec1()?;
        let empty: Vec<f64> = totals.iter().map(|&t| if t > 0.0 && t.is_finite() { 0.0 } else { 1.0 }).collect();
        if empty.iter().all(|&z| z == 0.0) {
            return Ok(resized.broadcast_div(&total)?);
        }
        let z = Tensor::from_vec(empty, (b, 1, 1), maps.device())?.to_dtype(maps.dtype())?;
        let num = resized.broadcast_add(&z)?;
        let den = (total + (z * (th * tw) as f64)?)?;
        Ok(num.broadcast_div(&den)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};
    use fpembed_core::minutia_map::attention_mask_from_values;
    use ndarray::Array3;

    #[test]
    fn mask_matches_core_definition() {
        let vals = Array3::from_shape_fn((6, 32, 32), |(k, r, c)| {
            (-(((r as f64 - 10.0).powi(2) + (c as f64 - 20.0 - k as f64).powi(2)) / 18.0)).exp()
        });
        let expect = attention_mask_from_values(&vals, (4, 4));
        let t = Tensor::from_iter(vals.iter().copied(), &Device::Cpu).unwrap().reshape((1, 6, 32, 32)).unwrap();
        let mb = MaskBuilder::new(32, (4, 4), DType::F64, &Device::Cpu).unwrap();
        let got: Vec<Vec<f64>> = mb.forward(&t).unwrap().squeeze(0).unwrap().to_vec2().unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert!((got[r][c] - expect.weights[[r, c]]).abs() < 1e-12);
            }
        }
        let zeros = Tensor::zeros((2, 6, 32, 32), DType::F64, &Device::Cpu).unwrap();
        let u: Vec<f64> = mb.forward(&zeros).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        assert!(u.iter().all(|&v| (v - 1.0 / 16.0).abs() < 1e-15));
    }
}
