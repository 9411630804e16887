//! Rotation-only spatial transformer.
//!
//! The sampler rotates about the image center `((W-1)/2, (H-1)/2)`. Output
//! pixel `(x, y)` reads the input at
//! `(cx + cos θ·dx + sin θ·dy, cy − sin θ·dx + cos θ·dy)` with
//! `(dx, dy) = (x − cx, y − cy)`, bilinearly, with zeros outside the frame.
//! The grid has one degree of freedom per image: no translation or scale.

use candle_core::{DType, Device, Tensor};

use crate::error::Result;
use crate::layers::{global_average_pool, ConvBlock, Linear};
use crate::params::ParamStore;

/// Localization network regressing one bounded angle per image.
#[derive(Debug, Clone)]
pub struct Localizer {
    blocks: [ConvBlock; 3],
    head: Linear,
    bound: f64,
}

impl Localizer {
    pub fn new(p: &mut ParamStore, widths: [usize; 3], groups: usize, bound: f64) -> Result<Self> {
        Ok(Self {
            blocks: [
                ConvBlock::new(p, "stn.block0", 1, widths[0], 2, groups)?,
                ConvBlock::new(p, "stn.block1", widths[0], widths[1], 2, groups)?,
                ConvBlock::new(p, "stn.block2", widths[1], widths[2], 2, groups)?,
            ],
            // zero weights and bias: every image starts at θ = 0
            head: Linear::zeros(p, "stn.head", widths[2], 1)?,
            bound,
        })
    }

    /// `(B, 1, H, W) -> (B,)` angles in `(-bound, bound)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for b in &self.blocks {
            h = b.forward(&h)?;
        }
        let raw = self.head.forward(&global_average_pool(&h)?)?.squeeze(1)?;
        Ok((raw.tanh()? * self.bound)?)
    }
}

/// Rotates a batch `(B, C, H, W)` by per-image angles `theta` of shape
/// `(B,)`. Differentiable in both the image and the angles.
pub fn rotate_bilinear(x: &Tensor, theta: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let dtype = x.dtype();
    let dev = x.device();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let n = h * w;

    // output-grid offsets, shape (1, n)
    let (gx, gy) = grid_offsets(h, w, cx, cy, dtype, dev)?;
    let cos = theta.cos()?.reshape((b, 1))?;
    let sin = theta.sin()?.reshape((b, 1))?;
    let xs = ((cos.broadcast_mul(&gx)? + sin.broadcast_mul(&gy)?)? + cx)?;
    let ys = ((cos.broadcast_mul(&gy)? - sin.broadcast_mul(&gx)?)? + cy)?;

    let x0 = xs.detach().floor()?;
    let y0 = ys.detach().floor()?;
    let fx = (&xs - &x0)?;
    let fy = (&ys - &y0)?;
    let one_fx = (1.0 - &fx)?;
    let one_fy = (1.0 - &fy)?;

    let flat = x.reshape((b, c, n))?;
    let x0v: Vec<f64> = x0.to_dtype(DType::F64)?.flatten_all()?.to_vec1()?;
    let y0v: Vec<f64> = y0.to_dtype(DType::F64)?.flatten_all()?.to_vec1()?;

    let mut out: Option<Tensor> = None;
    for (ddx, ddy, wx, wy) in [(0, 0, &one_fx, &one_fy), (1, 0, &fx, &one_fy), (0, 1, &one_fx, &fy), (1, 1, &fx, &fy)] {
        let mut idx = Vec::with_capacity(b * n);
        let mut valid = Vec::with_capacity(b * n);
        for (&px, &py) in x0v.iter().zip(&y0v) {
            let (sx, sy) = (px + ddx as f64, py + ddy as f64);
            let inside = sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64;
            idx.push(if inside { sy as u32 * w as u32 + sx as u32 } else { 0 });
            valid.push(if inside { 1.0 } else { 0.0 });
        }
        let idx = Tensor::from_vec(idx, (b, 1, n), dev)?.broadcast_as((b, c, n))?.contiguous()?;
        let valid = Tensor::from_vec(valid, (b, n), dev)?.to_dtype(dtype)?;
        let weight = (wx * wy)?.mul(&valid)?.reshape((b, 1, n))?;
        let term = flat.gather(&idx, 2)?.broadcast_mul(&weight)?;
        out = Some(match out {
            Some(acc) => (acc + term)?,
            None => term,
        });
    }
    Ok(out.expect("four corners").reshape((b, c, h, w))?)
}

fn grid_offsets(h: usize, w: usize, cx: f64, cy: f64, dtype: DType, dev: &Device) -> Result<(Tensor, Tensor)> {
    let mut gx = Vec::with_capacity(h * w);
    let mut gy = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            gx.push(c as f64 - cx);
            gy.push(r as f64 - cy);
        }
    }
    Ok((
        Tensor::from_vec(gx, (1, h * w), dev)?.to_dtype(dtype)?,
        Tensor::from_vec(gy, (1, h * w), dev)?.to_dtype(dtype)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn to_tensor(a: &Array2<f64>) -> Tensor {
        let (h, w) = a.dim();
        Tensor::from_iter(a.iter().copied(), &Device::Cpu).unwrap().reshape((1, 1, h, w)).unwrap()
    }

    fn to_array(t: &Tensor) -> Array2<f64> {
        let (_, _, h, w) = t.dims4().unwrap();
        let v: Vec<f64> = t.flatten_all().unwrap().to_vec1().unwrap();
        Array2::from_shape_vec((h, w), v).unwrap()
    }

    fn angle(t: f64) -> Tensor {
        Tensor::new(&[t], &Device::Cpu).unwrap()
    }

    #[test]
    fn zero_angle_is_exact_identity() {
        let a = Array2::from_shape_fn((33, 40), |(r, c)| ((r * 7 + c * 3) % 11) as f64 / 10.0);
        let out = rotate_bilinear(&to_tensor(&a), &angle(0.0)).unwrap();
        assert_eq!(to_array(&out), a);
    }

    #[test]
    fn matches_core_raster_rotation() {
        let a = Array2::from_shape_fn((40, 40), |(r, c)| ((r as f64 * 0.3).sin() * (c as f64 * 0.2).cos()).abs());
        for t in [0.3, -1.2, 2.5] {
            let ours = to_array(&rotate_bilinear(&to_tensor(&a), &angle(t)).unwrap());
            let core = fpembed_core::raster::rotate(&a, t);
            let diff = (&ours - &core).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            assert!(diff < 1e-12, "θ = {t}: {diff}");
        }
    }

    #[test]
    fn quarter_turn_moves_bright_pixel() {
        let mut a = Array2::zeros((256, 256));
        a[[64, 128]] = 1.0;
        let out = to_array(&rotate_bilinear(&to_tensor(&a), &angle(std::f64::consts::FRAC_PI_2)).unwrap());
        let (mut best, mut at) = (0.0, (0, 0));
        for ((r, c), &v) in out.indexed_iter() {
            if v > best {
                best = v;
                at = (r, c);
            }
        }
        assert!(at.0.abs_diff(128) <= 1 && at.1.abs_diff(192) <= 1, "{at:?}");
        let near: f64 = out.slice(ndarray::s![126..131, 189..195]).sum();
        assert!((near - out.sum()).abs() < 1e-9 && near > 0.99);
    }
}
