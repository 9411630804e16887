//! Enhancement, resizing, zero-mean normalization and the band-limited
//! spectrum used by the frequency branch.

use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::data_io::{FingerprintImage, Minutia, MinutiaSet, MIN_SIDE};
use crate::error::{Error, Result};
use crate::raster::{self, SampleGrid};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EnhanceMethod {
    None,
    /// Blockwise zero-mean unit-variance normalization remapped to `[0, 1]`.
    LocalNormalize { block: usize },
    /// Reads the pre-enhanced sibling `<basename>.enh.<ext>`.
    External,
}

impl Default for EnhanceMethod {
    fn default() -> Self {
        EnhanceMethod::LocalNormalize { block: 16 }
    }
}

/// Path of the pre-enhanced sibling for `source`.
pub fn enhanced_sibling(source: &Path) -> PathBuf {
    let stem = source.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = source.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_default();
    source.with_file_name(format!("{stem}.enh.{ext}"))
}

/// `source` is the file the image was read from; only `External` uses it.
pub fn enhance(image: &FingerprintImage, method: &EnhanceMethod, source: Option<&Path>) -> Result<FingerprintImage> {
    match method {
        EnhanceMethod::None => Ok(image.clone()),
        EnhanceMethod::LocalNormalize { block } => image.with_pixels(local_normalize(image.pixels(), *block)),
        EnhanceMethod::External => {
            let src = source.ok_or_else(|| {
                Error::Input("external enhancement needs the source image path".into())
            })?;
            let sibling = enhanced_sibling(src);
            if !sibling.is_file() {
                return Err(Error::Input(format!(
                    "enhanced sibling {} not found",
                    sibling.display()
                )));
            }
            image.with_pixels(raster::load_gray(&sibling)?)
        }
    }
}

pub fn local_normalize(pixels: &Array2<f64>, block: usize) -> Array2<f64> {
    let block = block.max(1);
    let (h, w) = pixels.dim();
    let mut z = Array2::<f64>::zeros((h, w));
    for r0 in (0..h).step_by(block) {
        for c0 in (0..w).step_by(block) {
            let r1 = (r0 + block).min(h);
            let c1 = (c0 + block).min(w);
            let tile = pixels.slice(s![r0..r1, c0..c1]);
            let n = tile.len() as f64;
            let mean = tile.sum() / n;
            let var = tile.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            let mut out = z.slice_mut(s![r0..r1, c0..c1]);
            if std > 1e-12 {
                out.zip_mut_with(&tile, |o, &v| *o = (v - mean) / std);
            }
        }
    }
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-12 {
        return Array2::from_elem((h, w), 0.5);
    }
    z.mapv(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// Pads to a square with the border-mean intensity, then resamples
/// bilinearly (corner-aligned) to `side`×`side`.
pub fn resize_input(image: &FingerprintImage, side: usize) -> Result<FingerprintImage> {
    if side < MIN_SIDE {
        return Err(Error::Parameter(format!("resize side {side} is below {MIN_SIDE}")));
    }
    image.with_pixels(resize_square(image.pixels(), side))
}

pub fn resize_square(pixels: &Array2<f64>, side: usize) -> Array2<f64> {
    let (h, w) = pixels.dim();
    let square = if h == w {
        pixels.clone()
    } else {
        let n = h.max(w);
        let fill = border_mean(pixels);
        let mut padded = Array2::from_elem((n, n), fill);
        let r0 = (n - h) / 2;
        let c0 = (n - w) / 2;
        padded.slice_mut(s![r0..r0 + h, c0..c0 + w]).assign(pixels);
        padded
    };
    raster::resample(&square, side, side, SampleGrid::AlignCorners)
        .mapv(|v| v.clamp(0.0, 1.0))
}

fn border_mean(pixels: &Array2<f64>) -> f64 {
    let (h, w) = pixels.dim();
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((r, c), v) in pixels.indexed_iter() {
        if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Maps minutiae of an `h × w` image into the frame produced by
/// [`resize_square`] at `side`. Angles are unchanged.
pub fn resize_minutiae(set: &MinutiaSet, h: usize, w: usize, side: usize) -> MinutiaSet {
    let n = h.max(w);
    let r0 = ((n - h) / 2) as f64;
    let c0 = ((n - w) / 2) as f64;
    let scale = if n > 1 { (side as f64 - 1.0) / (n as f64 - 1.0) } else { 1.0 };
    let items = set
        .items
        .iter()
        .map(|m| Minutia { x: (m.x + c0) * scale, y: (m.y + r0) * scale, ..*m })
        .collect();
    MinutiaSet::new(items, set.image_ref.clone())
}

pub fn normalize_zero_mean(image: &FingerprintImage) -> Array2<f64> {
    zero_mean(image.pixels())
}

pub fn zero_mean(pixels: &Array2<f64>) -> Array2<f64> {
    let m = raster::mean(pixels);
    pixels.mapv(|v| v - m)
}

/// Centered crop of the shifted DFT. DC sits at index `(band_h/2, band_w/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPatch {
    pub real: Array2<f64>,
    pub imag: Array2<f64>,
}

impl SpectrumPatch {
    pub fn shape(&self) -> (usize, usize) {
        self.real.dim()
    }

    pub fn dc_index(&self) -> (usize, usize) {
        let (h, w) = self.shape();
        (h / 2, w / 2)
    }

    pub fn energy(&self) -> f64 {
        self.real.iter().zip(self.imag.iter()).map(|(r, i)| r * r + i * i).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumOptions {
    pub band_fraction: f64,
    /// Zero the corners of the crop outside the inscribed ellipse.
    pub elliptical_mask: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            band_fraction: 0.5,
            elliptical_mask: false,
        }
    }
}

/// Crop length for `side` at `band_fraction`; must be an even integer.
pub fn band_len(side: usize, band_fraction: f64) -> Result<usize> {
    if !(band_fraction > 0.0 && band_fraction <= 1.0) {
        return Err(Error::Parameter(format!("band fraction {band_fraction} not in (0, 1]")));
    }
    let len = band_fraction * side as f64;
    let rounded = len.round();
    if (len - rounded).abs() > 1e-9 || rounded as usize % 2 != 0 || rounded < 2.0 {
        return Err(Error::Parameter(format!(
            "band crop {len} of side {side} is not an even integer"
        )));
    }
    Ok(rounded as usize)
}

/// Offset of the first cropped row within the shifted spectrum of length `n`.
pub fn band_offset(n: usize, band: usize) -> usize {
    n / 2 - band / 2
}

/// Signed frequency index (in bins) of shifted-spectrum position `k`.
pub fn shifted_frequency(n: usize, k: usize) -> isize {
    k as isize - (n / 2) as isize
}

pub fn to_spectrum(zero_mean: &Array2<f64>, options: &SpectrumOptions) -> Result<SpectrumPatch> {
    let (h, w) = zero_mean.dim();
    let mean = raster::mean(zero_mean);
    if mean.abs() >= 1e-4 {
        return Err(Error::Contract(format!("spectrum input mean {mean:e} is not zero")));
    }
    let bh = band_len(h, options.band_fraction)?;
    let bw = band_len(w, options.band_fraction)?;

    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);
    let mut data: Vec<Complex<f64>> = zero_mean.iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in data.chunks_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for (r, slot) in col.iter_mut().enumerate() {
            *slot = data[r * w + c];
        }
        col_fft.process(&mut col);
        for (r, v) in col.iter().enumerate() {
            data[r * w + c] = *v;
        }
    }

    let r0 = band_offset(h, bh);
    let c0 = band_offset(w, bw);
    let mut real = Array2::zeros((bh, bw));
    let mut imag = Array2::zeros((bh, bw));
    for pr in 0..bh {
        let u = shifted_frequency(h, r0 + pr).rem_euclid(h as isize) as usize;
        for pc in 0..bw {
            let v = shifted_frequency(w, c0 + pc).rem_euclid(w as isize) as usize;
            let z = data[u * w + v];
            real[[pr, pc]] = z.re;
            imag[[pr, pc]] = z.im;
        }
    }
    if options.elliptical_mask {
        apply_ellipse(&mut real);
        apply_ellipse(&mut imag);
    }
    Ok(SpectrumPatch { real, imag })
}

fn apply_ellipse(a: &mut Array2<f64>) {
    let mask = ellipse_mask(a.nrows(), a.ncols());
    *a *= &mask;
}

/// 1 inside the ellipse inscribed in an `h × w` crop centered on the DC bin,
/// 0 outside.
pub fn ellipse_mask(h: usize, w: usize) -> Array2<f64> {
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    let (ry, rx) = (h as f64 / 2.0, w as f64 / 2.0);
    Array2::from_shape_fn((h, w), |(r, c)| {
        let dy = (r as f64 - cy) / ry;
        let dx = (c as f64 - cx) / rx;
        if dx * dx + dy * dy > 1.0 {
            0.0
        } else {
            1.0
        }
    })
}

/// Total spectral energy `Σ|X|²`, via Parseval.
pub fn spectral_energy(signal: &Array2<f64>) -> f64 {
    signal.len() as f64 * signal.iter().map(|v| v * v).sum::<f64>()
}
