//! Synthetic fingerprints for dataset-free testing.
//!
//! A master print is `cos(ψ)` where the phase `ψ` is the sum of a smooth
//! carrier with unit-speed phase (planar ridges, circular arcs, or rings
//! around a core point inside the frame) and one spiral term
//! `±atan2(y - y_n, x - x_n)` per planted minutia. Each spiral adds or removes
//! exactly one ridge, so the minutiae positions are known exactly. Impressions
//! of the same finger re-render the master under a random rigid motion with
//! per-impression contrast and noise.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_io::{normalize_angle, FingerprintImage, Minutia, MinutiaKind, MinutiaSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    /// Ridge frequency in cycles per pixel, drawn per finger.
    pub frequency_range: (f64, f64),
    /// Ridge curvature (1 / arc radius in pixels), drawn per finger. The
    /// carrier phase has unit gradient, so the local ridge frequency is the
    /// drawn frequency everywhere.
    pub curvature_range: (f64, f64),
    /// Probability that a finger gets a ring core inside the frame instead
    /// of gently curved arcs.
    pub core_probability: f64,
    pub minutia_count: usize,
    /// Per-impression rotation drawn from `±rotation_jitter` radians.
    pub rotation_jitter: f64,
    /// Per-impression translation drawn from `±translation_jitter` pixels.
    pub translation_jitter: f64,
    pub noise_sigma: f64,
    /// Ridge contrast drawn from `[1 - contrast_jitter, 1]`.
    pub contrast_jitter: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            frequency_range: (0.08, 0.14),
            curvature_range: (0.0, 1.0 / 96.0),
            core_probability: 0.3,
            minutia_count: 24,
            rotation_jitter: 0.2,
            translation_jitter: 8.0,
            noise_sigma: 0.05,
            contrast_jitter: 0.3,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Parameter(format!(
                "synthetic image size {}x{} must be positive",
                self.width, self.height
            )));
        }
        let (lo, hi) = self.frequency_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Parameter(format!(
                "ridge frequency range ({lo}, {hi}) must be positive and ordered"
            )));
        }
        let (clo, chi) = self.curvature_range;
        if !(clo >= 0.0 && chi >= clo && chi.is_finite()) {
            return Err(Error::Parameter(format!(
                "curvature range ({clo}, {chi}) must be nonnegative and ordered"
            )));
        }
        if !(0.0..=1.0).contains(&self.core_probability) {
            return Err(Error::Parameter("core probability must lie in [0, 1]".into()));
        }
        if self.noise_sigma < 0.0 || !(0.0..=1.0).contains(&self.contrast_jitter) {
            return Err(Error::Parameter("noise and contrast jitter must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Identity of one synthetic finger.
#[derive(Debug, Clone)]
struct MasterPrint {
    frequency: f64,
    /// Ridge normal direction at the anchor point.
    direction: f64,
    /// Center of the ridge arcs; `None` for planar ridges.
    center: Option<(f64, f64)>,
    anchor: (f64, f64),
    phase0: f64,
    /// `(x, y, polarity)` of each planted spiral.
    spirals: Vec<(f64, f64, f64)>,
}

impl MasterPrint {
    fn draw(seed: u64, spec: &SynthSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (spec.width as f64, spec.height as f64);
        let frequency = uniform(&mut rng, spec.frequency_range);
        let direction = rng.random_range(0.0..PI);
        let curvature = uniform(&mut rng, spec.curvature_range);
        let anchor = (
            w / 2.0 + rng.random_range(-0.2..=0.2) * w,
            h / 2.0 + rng.random_range(-0.2..=0.2) * h,
        );
        let center = if rng.random_bool(spec.core_probability) {
            Some(anchor)
        } else if curvature > 0.0 {
            let radius = 1.0 / curvature;
            Some((anchor.0 - radius * direction.cos(), anchor.1 - radius * direction.sin()))
        } else {
            None
        };
        let phase0 = rng.random_range(0.0..TAU);

        let margin_x = 0.12 * w;
        let margin_y = 0.12 * h;
        let min_sep = 1.5 / frequency;
        let mut spirals: Vec<(f64, f64, f64)> = Vec::with_capacity(spec.minutia_count);
        let mut attempts = 0;
        while spirals.len() < spec.minutia_count {
            let x = rng.random_range(margin_x..=(w - margin_x).max(margin_x));
            let y = rng.random_range(margin_y..=(h - margin_y).max(margin_y));
            let polarity = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            attempts += 1;
            // relax the spacing rule rather than loop forever on crowded specs
            let sep = if attempts > 200 * spec.minutia_count.max(1) { 0.0 } else { min_sep };
            let clear = spirals
                .iter()
                .all(|&(sx, sy, _)| (sx - x).hypot(sy - y) >= sep && (sx, sy) != (x, y));
            if clear {
                spirals.push((x, y, polarity));
            }
        }
        Self {
            frequency,
            direction,
            center,
            anchor,
            phase0,
            spirals,
        }
    }

    fn carrier_phase(&self, x: f64, y: f64) -> f64 {
        let dist = match self.center {
            Some((cx, cy)) => (x - cx).hypot(y - cy),
            None => {
                let (s, c) = self.direction.sin_cos();
                (x - self.anchor.0) * c + (y - self.anchor.1) * s
            }
        };
        TAU * self.frequency * dist
    }

    fn carrier_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let k = TAU * self.frequency;
        let unit = match self.center {
            Some((cx, cy)) => {
                let r = (x - cx).hypot(y - cy);
                if r > 1e-12 {
                    ((x - cx) / r, (y - cy) / r)
                } else {
                    (1.0, 0.0)
                }
            }
            None => {
                let (s, c) = self.direction.sin_cos();
                (c, s)
            }
        };
        (k * unit.0, k * unit.1)
    }

    fn phase(&self, x: f64, y: f64) -> f64 {
        let spiral: f64 = self
            .spirals
            .iter()
            .map(|&(sx, sy, p)| p * (y - sy).atan2(x - sx))
            .sum();
        self.phase0 + self.carrier_phase(x, y) + spiral
    }

    /// Minutiae in master coordinates. The angle points along the ridge that
    /// terminates at the spiral; positive spirals are recorded as endings.
    fn minutiae(&self) -> Vec<Minutia> {
        self.spirals
            .iter()
            .map(|&(x, y, p)| {
                let (gx, gy) = self.carrier_gradient(x, y);
                let theta = (-p * gx).atan2(p * gy);
                let kind = if p > 0.0 {
                    MinutiaKind::Ending
                } else {
                    MinutiaKind::Bifurcation
                };
                Minutia::new(x, y, theta, kind)
            })
            .collect()
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Rigid motion about the image center plus photometric settings.
#[derive(Debug, Clone, Copy)]
struct Impression {
    rotation: f64,
    shift: (f64, f64),
    contrast: f64,
    noise_sigma: f64,
    noise_seed: u64,
}

impl Impression {
    fn identity() -> Self {
        Self {
            rotation: 0.0,
            shift: (0.0, 0.0),
            contrast: 1.0,
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }

    fn draw(seed: u64, spec: &SynthSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sym = |rng: &mut ChaCha8Rng, a: f64| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
        Self {
            rotation: sym(&mut rng, spec.rotation_jitter),
            shift: (
                sym(&mut rng, spec.translation_jitter),
                sym(&mut rng, spec.translation_jitter),
            ),
            contrast: 1.0 - rng.random_range(0.0..=spec.contrast_jitter),
            noise_sigma: spec.noise_sigma,
            noise_seed: rng.random(),
        }
    }
}

fn render(master: &MasterPrint, imp: &Impression, spec: &SynthSpec) -> (Array2<f64>, Vec<Minutia>) {
    let (w, h) = (spec.width, spec.height);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (s, c) = imp.rotation.sin_cos();
    let mut pixels = Array2::from_shape_fn((h, w), |(r, col)| {
        // inverse rigid motion: output pixel -> master coordinates
        let dx = col as f64 - cx - imp.shift.0;
        let dy = r as f64 - cy - imp.shift.1;
        let mx = cx + c * dx + s * dy;
        let my = cy - s * dx + c * dy;
        0.5 + 0.5 * imp.contrast * master.phase(mx, my).cos()
    });
    if imp.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(imp.noise_seed);
        let normal = Normal::new(0.0, imp.noise_sigma).expect("finite sigma");
        pixels.mapv_inplace(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0));
    }
    let minutiae = master
        .minutiae()
        .into_iter()
        .filter_map(|m| {
            let dx = m.x - cx;
            let dy = m.y - cy;
            let x = cx + c * dx - s * dy + imp.shift.0;
            let y = cy + s * dx + c * dy + imp.shift.1;
            let inside = x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64;
            inside.then(|| Minutia::new(x, y, normalize_angle(m.theta + imp.rotation), m.kind))
        })
        .collect();
    (pixels, minutiae)
}

/// Master print for `seed`: no rigid motion, no noise, full contrast.
pub fn generate_synthetic_fingerprint(seed: u64, spec: &SynthSpec) -> Result<(FingerprintImage, MinutiaSet)> {
    spec.validate()?;
    let master = MasterPrint::draw(seed, spec);
    let (pixels, minutiae) = render(&master, &Impression::identity(), spec);
    let image = FingerprintImage::new(pixels, 0, 0, "synthetic")?;
    Ok((image, MinutiaSet::new(minutiae, format!("synthetic-{seed}"))))
}

/// Quadrature partner of [`generate_synthetic_fingerprint`]: `0.5 + 0.5·sin ψ`.
/// Together the two rasters determine the ridge phase at every pixel.
pub fn synthetic_quadrature(seed: u64, spec: &SynthSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let master = MasterPrint::draw(seed, spec);
    Ok(Array2::from_shape_fn((spec.height, spec.width), |(r, c)| {
        0.5 + 0.5 * master.phase(c as f64, r as f64).sin()
    }))
}

/// One impression of the finger identified by `finger_seed`.
pub fn synthesize_impression(
    finger_seed: u64,
    impression_seed: u64,
    spec: &SynthSpec,
) -> Result<(Array2<f64>, MinutiaSet)> {
    spec.validate()?;
    let master = MasterPrint::draw(finger_seed, spec);
    let imp = Impression::draw(impression_seed, spec);
    let (pixels, minutiae) = render(&master, &imp, spec);
    Ok((pixels, MinutiaSet::new(minutiae, String::new())))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn finger_seed(seed: u64, finger: usize) -> u64 {
    splitmix(splitmix(seed) ^ finger as u64)
}

pub fn impression_seed(seed: u64, finger: usize, impression: usize) -> u64 {
    splitmix(finger_seed(seed, finger) ^ splitmix(impression as u64 + 0x5EED))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    fn hash(a: &Array2<f64>) -> u64 {
        let mut h = DefaultHasher::new();
        for v in a {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Radius (in bins) of the maximum of the radially binned power spectrum.
    fn radial_peak(img: &Array2<f64>) -> usize {
        let (h, w) = img.dim();
        let mean = img.mean().unwrap();
        let mut planner = FftPlanner::<f64>::new();
        let row_fft = planner.plan_fft_forward(w);
        let col_fft = planner.plan_fft_forward(h);
        let mut data: Vec<Complex<f64>> = img.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
        for row in data.chunks_mut(w) {
            row_fft.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); h];
        for c in 0..w {
            for r in 0..h {
                col[r] = data[r * w + c];
            }
            col_fft.process(&mut col);
            for r in 0..h {
                data[r * w + c] = col[r];
            }
        }
        let mut bins = vec![0.0; h.max(w)];
        for r in 0..h {
            for c in 0..w {
                let u = if r < h / 2 { r as f64 } else { r as f64 - h as f64 };
                let v = if c < w / 2 { c as f64 } else { c as f64 - w as f64 };
                let rad = u.hypot(v).round() as usize;
                bins[rad] += data[r * w + c].norm_sqr();
            }
        }
        bins.iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::default();
        let (a, ma) = generate_synthetic_fingerprint(7, &spec).unwrap();
        let (b, mb) = generate_synthetic_fingerprint(7, &spec).unwrap();
        assert_eq!(a.pixels(), b.pixels());
        assert_eq!(ma, mb);
        let (c, _) = generate_synthetic_fingerprint(8, &spec).unwrap();
        assert_ne!(hash(a.pixels()), hash(c.pixels()));
    }

    #[test]
    fn planted_count_matches_and_pixels_in_range() {
        let spec = SynthSpec {
            minutia_count: 17,
            ..SynthSpec::default()
        };
        let (img, set) = generate_synthetic_fingerprint(3, &spec).unwrap();
        assert_eq!(set.len(), 17);
        assert!(img.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        set.check_bounds(256, 256).unwrap();
    }

    #[test]
    fn zero_minutiae_gives_unbroken_carrier() {
        let spec = SynthSpec {
            minutia_count: 0,
            ..SynthSpec::default()
        };
        let (img, set) = generate_synthetic_fingerprint(11, &spec).unwrap();
        assert!(set.is_empty());
        let master = MasterPrint::draw(11, &spec);
        // bare carrier: every pixel equals the closed form
        for ((r, c), v) in img.pixels().indexed_iter() {
            let want = 0.5 + 0.5 * (master.phase0 + master.carrier_phase(c as f64, r as f64)).cos();
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_peak_sits_at_ridge_frequency() {
        for (curvature, core) in [((0.0, 0.0), 0.0), ((0.0, 1.0 / 64.0), 0.0), ((0.0, 0.0), 1.0)] {
            let spec = SynthSpec {
                frequency_range: (0.1, 0.1),
                curvature_range: curvature,
                core_probability: core,
                ..SynthSpec::default()
            };
            let (img, _) = generate_synthetic_fingerprint(5, &spec).unwrap();
            let peak = radial_peak(img.pixels());
            assert!((24..=27).contains(&peak), "peak at {peak} bins for {curvature:?}/{core}");
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = SynthSpec {
            frequency_range: (0.0, 0.1),
            ..SynthSpec::default()
        };
        assert!(matches!(generate_synthetic_fingerprint(1, &bad), Err(Error::Parameter(_))));
        let bad = SynthSpec {
            width: 0,
            ..SynthSpec::default()
        };
        assert!(matches!(generate_synthetic_fingerprint(1, &bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn impressions_move_minutiae_rigidly() {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            ..SynthSpec::default()
        };
        let fs = finger_seed(9, 0);
        let (_, master) = generate_synthetic_fingerprint(fs, &spec).unwrap();
        let (_, moved) = synthesize_impression(fs, impression_seed(9, 0, 1), &spec).unwrap();
        assert!(!moved.is_empty());
        // pairwise distances are preserved by a rigid motion
        let d = |a: &Minutia, b: &Minutia| (a.x - b.x).hypot(a.y - b.y);
        let m = &master.items;
        let kinds: Vec<_> = moved.items.iter().map(|m| m.kind).collect();
        assert!(kinds.len() <= m.len());
        if moved.len() == m.len() {
            for i in 0..m.len() {
                for j in 0..m.len() {
                    assert!((d(&m[i], &m[j]) - d(&moved.items[i], &moved.items[j])).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn spiral_changes_ridge_count_across_minutia() {
        // counting phase wraps along a closed loop around a spiral gives ±2π
        let spec = SynthSpec {
            minutia_count: 1,
            ..SynthSpec::default()
        };
        let master = MasterPrint::draw(21, &spec);
        let (sx, sy, p) = master.spirals[0];
        let n = 720;
        let mut total = 0.0;
        let mut prev = master.phase(sx + 3.0, sy);
        for k in 1..=n {
            let a = TAU * k as f64 / n as f64;
            let cur = master.phase(sx + 3.0 * a.cos(), sy + 3.0 * a.sin());
            let mut d = cur - prev;
            d -= TAU * (d / TAU).round();
            total += d;
            prev = cur;
        }
        assert!((total - p * TAU).abs() < 1e-6);
    }
}
