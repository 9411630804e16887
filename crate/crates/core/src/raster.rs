//! Grayscale raster helpers shared by the preprocessing, augmentation and
//! minutia-map code. Rasters are `Array2<f64>` indexed `[row, col]`; a point
//! `(x, y)` refers to column `x` and row `y`.

use std::path::Path;

use image::{GrayImage, ImageReader, Luma};
use ndarray::Array2;

use crate::error::Result;

/// Sample positions used when resampling a raster to a new size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleGrid {
    /// Corner pixels map onto corner pixels.
    AlignCorners,
    /// Pixel centers are aligned (`src = (dst + 0.5) * ratio - 0.5`).
    HalfPixel,
}

/// How reads outside the raster are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    Zero,
    Clamp,
}

/// Reads an image file as 8-bit grayscale and maps it to `[0, 1]`.
pub fn load_gray(path: &Path) -> Result<Array2<f64>> {
    let img = ImageReader::open(path)?.with_guessed_format()?.decode()?.into_luma8();
    let (w, h) = img.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        f64::from(img.get_pixel(c as u32, r as u32)[0]) / 255.0
    }))
}

/// Writes a `[0, 1]` raster as an 8-bit grayscale image; values are clamped.
pub fn save_gray(path: &Path, pixels: &Array2<f64>) -> Result<()> {
    let (h, w) = pixels.dim();
    let mut img = GrayImage::new(w as u32, h as u32);
    for ((r, c), &v) in pixels.indexed_iter() {
        let q = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        img.put_pixel(c as u32, r as u32, Luma([q]));
    }
    img.save(path)?;
    Ok(())
}

/// Bilinear read at continuous position `(x, y)`.
pub fn sample_bilinear(src: &Array2<f64>, x: f64, y: f64, border: Border) -> f64 {
    let (h, w) = src.dim();
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let read = |cx: isize, cy: isize| -> f64 {
        match border {
            Border::Zero => {
                if cx < 0 || cy < 0 || cx >= w as isize || cy >= h as isize {
                    0.0
                } else {
                    src[[cy as usize, cx as usize]]
                }
            }
            Border::Clamp => {
                let cx = cx.clamp(0, w as isize - 1) as usize;
                let cy = cy.clamp(0, h as isize - 1) as usize;
                src[[cy, cx]]
            }
        }
    };
    let top = read(x0, y0) * (1.0 - fx) + read(x0 + 1, y0) * fx;
    let bottom = read(x0, y0 + 1) * (1.0 - fx) + read(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// 1-D interpolation taps: for each output index, `(lo, hi, weight_of_hi)`.
pub fn linear_taps(src_len: usize, dst_len: usize, grid: SampleGrid) -> Vec<(usize, usize, f64)> {
    (0..dst_len)
        .map(|d| {
            let pos = match grid {
                SampleGrid::AlignCorners => {
                    if dst_len == 1 || src_len == 1 {
                        0.0
                    } else {
                        d as f64 * (src_len - 1) as f64 / (dst_len - 1) as f64
                    }
                }
                SampleGrid::HalfPixel => {
                    let ratio = src_len as f64 / dst_len as f64;
                    ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src_len - 1) as f64)
                }
            };
            let lo = (pos.floor() as usize).min(src_len - 1);
            let hi = (lo + 1).min(src_len - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Separable bilinear resampling to `(out_h, out_w)`.
pub fn resample(src: &Array2<f64>, out_h: usize, out_w: usize, grid: SampleGrid) -> Array2<f64> {
    let (h, w) = src.dim();
    if (h, w) == (out_h, out_w) {
        return src.clone();
    }
    let rows = linear_taps(h, out_h, grid);
    let cols = linear_taps(w, out_w, grid);
    Array2::from_shape_fn((out_h, out_w), |(r, c)| {
        let (r0, r1, fy) = rows[r];
        let (c0, c1, fx) = cols[c];
        let top = src[[r0, c0]] * (1.0 - fx) + src[[r0, c1]] * fx;
        let bottom = src[[r1, c0]] * (1.0 - fx) + src[[r1, c1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Rotates a raster about its center `((w-1)/2, (h-1)/2)` by `theta` radians.
///
/// A point at offset `(dx, dy)` from the center moves to
/// `(cos θ·dx − sin θ·dy, sin θ·dx + cos θ·dy)`. Out-of-bounds reads are 0.
pub fn rotate(src: &Array2<f64>, theta: f64) -> Array2<f64> {
    let (h, w) = src.dim();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (s, c) = theta.sin_cos();
    Array2::from_shape_fn((h, w), |(r, col)| {
        let dx = col as f64 - cx;
        let dy = r as f64 - cy;
        let sx = cx + c * dx + s * dy;
        let sy = cy - s * dx + c * dy;
        sample_bilinear(src, sx, sy, Border::Zero)
    })
}

pub fn mean(a: &Array2<f64>) -> f64 {
    a.mean().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn align_corners_keeps_corner_values() {
        let src = array![[0.0, 1.0], [1.0, 0.0]];
        let out = resample(&src, 4, 4, SampleGrid::AlignCorners);
        assert_eq!(out[[0, 0]], 0.0);
        assert_eq!(out[[0, 3]], 1.0);
        assert_eq!(out[[3, 0]], 1.0);
        assert_eq!(out[[3, 3]], 0.0);
        // interior: one third of the way along each axis
        assert!((out[[0, 1]] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn same_size_resample_is_identity() {
        let src = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 / 35.0);
        assert_eq!(resample(&src, 5, 7, SampleGrid::HalfPixel), src);
        assert_eq!(resample(&src, 5, 7, SampleGrid::AlignCorners), src);
    }

    #[test]
    fn rotate_zero_is_identity_and_half_turn_flips() {
        let src = Array2::from_shape_fn((6, 6), |(r, c)| ((r * 6 + c) % 5) as f64 / 4.0);
        assert_eq!(rotate(&src, 0.0), src);
        let flipped = rotate(&src, std::f64::consts::PI);
        for ((r, c), v) in flipped.indexed_iter() {
            assert!((v - src[[5 - r, 5 - c]]).abs() < 1e-9);
        }
    }

    #[test]
    fn png_round_trip_quantizes_to_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let src = Array2::from_shape_fn((3, 4), |(r, c)| (r * 4 + c) as f64 / 11.0);
        save_gray(&path, &src).unwrap();
        let back = load_gray(&path).unwrap();
        for (a, b) in src.iter().zip(back.iter()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
