//! Training-time augmentations: contrast, noise, skin deformation and local
//! morphology. Deformation also moves the minutia annotations.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_io::{normalize_angle, Minutia, MinutiaSet};
use crate::error::{Error, Result};
use crate::raster::{self, Border};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformParams {
    /// Inner rigid-zone radius as a fraction of the shorter image side.
    pub inner_radius: f64,
    /// Outer radius (start of the moving rigid zone), same units.
    pub outer_radius: f64,
    /// Maximum translation of the outer zone in pixels.
    pub max_displacement: f64,
    /// Maximum rotation of the outer zone in radians.
    pub max_rotation: f64,
    /// Field center jitter around the image center, fraction of the side.
    pub center_jitter: f64,
}

impl Default for DeformParams {
    fn default() -> Self {
        Self {
            inner_radius: 0.15,
            outer_radius: 0.45,
            max_displacement: 8.0,
            max_rotation: 6.0 * PI / 180.0,
            center_jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub p_noise: f64,
    pub p_contrast: f64,
    pub p_deform: f64,
    pub p_morph: f64,
    pub noise_sigma_range: (f64, f64),
    pub contrast_gamma_range: (f64, f64),
    pub contrast_gain_range: (f64, f64),
    /// Patch area as a fraction of the image area.
    pub morph_area_fraction_range: (f64, f64),
    pub deform: DeformParams,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p_noise: 0.8,
            p_contrast: 0.8,
            p_deform: 0.5,
            p_morph: 0.5,
            noise_sigma_range: (0.0, 0.08),
            contrast_gamma_range: (0.7, 1.5),
            contrast_gain_range: (0.85, 1.15),
            morph_area_fraction_range: (0.0002, 0.002),
            deform: DeformParams::default(),
        }
    }
}

impl AugmentConfig {
    /// Validation errors name the offending field.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let probs = [
            ("p_noise", self.p_noise),
            ("p_contrast", self.p_contrast),
            ("p_deform", self.p_deform),
            ("p_morph", self.p_morph),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err((name.into(), format!("probability {p} not in [0, 1]")));
            }
        }
        let ranges = [
            ("noise_sigma_range", self.noise_sigma_range, 0.0),
            ("contrast_gamma_range", self.contrast_gamma_range, f64::MIN_POSITIVE),
            ("contrast_gain_range", self.contrast_gain_range, 0.0),
            ("morph_area_fraction_range", self.morph_area_fraction_range, 0.0),
        ];
        for (name, (lo, hi), min) in ranges {
            if !(lo >= min && hi >= lo && hi.is_finite()) {
                return Err((name.into(), format!("range ({lo}, {hi}) is not ordered and valid")));
            }
        }
        if self.morph_area_fraction_range.1 > 1.0 {
            return Err(("morph_area_fraction_range".into(), "area fraction above 1".into()));
        }
        let d = &self.deform;
        if !(d.inner_radius > 0.0 && d.inner_radius < d.outer_radius) {
            return Err((
                "deform.inner_radius".into(),
                format!("need 0 < inner ({}) < outer ({})", d.inner_radius, d.outer_radius),
            ));
        }
        if d.max_displacement < 0.0 || d.max_rotation < 0.0 || d.center_jitter < 0.0 {
            return Err(("deform".into(), "deformation magnitudes must be nonnegative".into()));
        }
        Ok(())
    }

    /// No augmentation at all.
    pub fn disabled() -> Self {
        Self {
            p_noise: 0.0,
            p_contrast: 0.0,
            p_deform: 0.0,
            p_morph: 0.0,
            ..Self::default()
        }
    }
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// `x -> clamp(gain · x^gamma)`.
pub fn apply_contrast(image: &Array2<f64>, gain: f64, gamma: f64) -> Array2<f64> {
    if gain == 1.0 && gamma == 1.0 {
        return image.clone();
    }
    image.mapv(|x| (gain * x.powf(gamma)).clamp(0.0, 1.0))
}

pub fn random_contrast(image: &Array2<f64>, config: &AugmentConfig, rng: &mut impl Rng) -> Array2<f64> {
    let gamma = draw(rng, config.contrast_gamma_range);
    let gain = draw(rng, config.contrast_gain_range);
    apply_contrast(image, gain, gamma)
}

pub fn apply_noise(image: &Array2<f64>, sigma: f64, rng: &mut impl Rng) -> Array2<f64> {
    if sigma <= 0.0 {
        return image.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    image.mapv(|x| (x + normal.sample(rng)).clamp(0.0, 1.0))
}

pub fn random_noise(image: &Array2<f64>, config: &AugmentConfig, rng: &mut impl Rng) -> Array2<f64> {
    let sigma = draw(rng, config.noise_sigma_range);
    apply_noise(image, sigma, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    Dilate,
    Erode,
}

/// Rectangular region `rows × cols` starting at `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Patch {
    pub fn area(&self) -> usize {
        self.rows * self.cols
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.row && r < self.row + self.rows && c >= self.col && c < self.col + self.cols
    }
}

/// Pixel-count bounds `[ceil(lo·HW), floor(hi·HW)]` for a morphology patch.
pub fn morph_area_bounds(h: usize, w: usize, range: (f64, f64)) -> (usize, usize) {
    let total = (h * w) as f64;
    let lo = (range.0 * total - 1e-9).ceil().max(0.0) as usize;
    let hi = (range.1 * total + 1e-9).floor() as usize;
    (lo, hi.max(lo).min(h * w))
}

/// Draws a patch whose area lies within the configured bounds; `None` when
/// the upper bound is zero.
pub fn draw_patch(h: usize, w: usize, range: (f64, f64), rng: &mut impl Rng) -> Option<Patch> {
    let (lo, hi) = morph_area_bounds(h, w, range);
    if hi == 0 {
        return None;
    }
    let lo = lo.max(1);
    let target = rng.random_range(lo..=hi);
    let aspect: f64 = rng.random_range(0.5..=2.0);
    let mut rows = ((target as f64 * aspect).sqrt().round() as usize).clamp(1, h);
    let mut cols = ((target as f64 / rows as f64).round() as usize).clamp(1, w);
    while rows * cols > hi {
        if cols > 1 {
            cols -= 1;
        } else {
            rows -= 1;
        }
    }
    while rows * cols < lo {
        if cols < w {
            cols += 1;
        } else if rows < h {
            rows += 1;
        } else {
            break;
        }
    }
    let row = rng.random_range(0..=h - rows);
    let col = rng.random_range(0..=w - cols);
    Some(Patch { row, col, rows, cols })
}

/// 3×3 grayscale dilation (max) or erosion (min) restricted to `patch`.
/// Neighbors outside the patch are read but never written.
pub fn apply_morphology(image: &Array2<f64>, patch: Patch, op: MorphOp) -> Array2<f64> {
    let (h, w) = image.dim();
    let mut out = image.clone();
    for r in patch.row..patch.row + patch.rows {
        for c in patch.col..patch.col + patch.cols {
            let mut acc = image[[r, c]];
            for rr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    let v = image[[rr, cc]];
                    acc = match op {
                        MorphOp::Dilate => acc.max(v),
                        MorphOp::Erode => acc.min(v),
                    };
                }
            }
            out[[r, c]] = acc;
        }
    }
    out
}

pub fn random_morphology(
    image: &Array2<f64>,
    config: &AugmentConfig,
    rng: &mut impl Rng,
) -> (Array2<f64>, Option<(Patch, MorphOp)>) {
    let (h, w) = image.dim();
    let Some(patch) = draw_patch(h, w, config.morph_area_fraction_range, rng) else {
        return (image.clone(), None);
    };
    let op = if rng.random_bool(0.5) {
        MorphOp::Dilate
    } else {
        MorphOp::Erode
    };
    (apply_morphology(image, patch, op), Some((patch, op)))
}

/// Three-zone skin deformation: no motion inside `inner_radius`, a rigid
/// motion beyond `outer_radius`, raised-cosine blend in between.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub dx: Array2<f64>,
    pub dy: Array2<f64>,
    pub center: (f64, f64),
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub rotation: f64,
    pub translation: (f64, f64),
}

/// Blend weight `w(d)` of the rigid motion at distance `d` from the center.
pub fn transition_weight(d: f64, inner: f64, outer: f64) -> f64 {
    if d <= inner {
        0.0
    } else if d >= outer {
        1.0
    } else {
        0.5 * (1.0 - (PI * (d - inner) / (outer - inner)).cos())
    }
}

impl DeformationField {
    /// Field with explicit parameters (radii in pixels).
    pub fn new(
        shape: (usize, usize),
        center: (f64, f64),
        inner_radius: f64,
        outer_radius: f64,
        rotation: f64,
        translation: (f64, f64),
    ) -> Result<Self> {
        if !(inner_radius >= 0.0 && inner_radius < outer_radius) {
            return Err(Error::Parameter(format!(
                "deformation radii need 0 <= inner ({inner_radius}) < outer ({outer_radius})"
            )));
        }
        let mut field = Self {
            dx: Array2::zeros(shape),
            dy: Array2::zeros(shape),
            center,
            inner_radius,
            outer_radius,
            rotation,
            translation,
        };
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let (dx, dy) = field.displacement(c as f64, r as f64);
                field.dx[[r, c]] = dx;
                field.dy[[r, c]] = dy;
            }
        }
        Ok(field)
    }

    pub fn weight_at(&self, x: f64, y: f64) -> f64 {
        let d = (x - self.center.0).hypot(y - self.center.1);
        transition_weight(d, self.inner_radius, self.outer_radius)
    }

    /// Continuous displacement at `(x, y)`.
    pub fn displacement(&self, x: f64, y: f64) -> (f64, f64) {
        let w = self.weight_at(x, y);
        if w == 0.0 {
            return (0.0, 0.0);
        }
        let (s, c) = self.rotation.sin_cos();
        let px = x - self.center.0;
        let py = y - self.center.1;
        let rigid_x = c * px - s * py + self.translation.0 - px;
        let rigid_y = s * px + c * py + self.translation.1 - py;
        (w * rigid_x, w * rigid_y)
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == 0.0 && self.translation == (0.0, 0.0)
    }

    /// Solves `p + d(p) = q` for `p` by fixed-point iteration.
    fn inverse(&self, qx: f64, qy: f64) -> (f64, f64) {
        let (mut px, mut py) = (qx, qy);
        for _ in 0..30 {
            let (dx, dy) = self.displacement(px, py);
            let (nx, ny) = (qx - dx, qy - dy);
            let done = (nx - px).abs() < 1e-10 && (ny - py).abs() < 1e-10;
            px = nx;
            py = ny;
            if done {
                break;
            }
        }
        (px, py)
    }
}

pub fn make_deformation_field(
    shape: (usize, usize),
    params: &DeformParams,
    rng: &mut impl Rng,
) -> Result<DeformationField> {
    let (h, w) = shape;
    let side = h.min(w) as f64;
    let inner = params.inner_radius * side;
    let outer = params.outer_radius * side;
    if !(inner > 0.0 && inner < outer) {
        return Err(Error::Parameter(format!(
            "deformation radii need 0 < inner ({inner}) < outer ({outer})"
        )));
    }
    let jitter = params.center_jitter * side;
    let sym = |rng: &mut dyn rand::RngCore, a: f64| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
    let center = (
        (w as f64 - 1.0) / 2.0 + sym(rng, jitter),
        (h as f64 - 1.0) / 2.0 + sym(rng, jitter),
    );
    let rotation = sym(rng, params.max_rotation);
    let magnitude = if params.max_displacement > 0.0 {
        rng.random_range(0.0..=params.max_displacement)
    } else {
        0.0
    };
    let direction = rng.random_range(0.0..2.0 * PI);
    let translation = (magnitude * direction.cos(), magnitude * direction.sin());
    DeformationField::new(shape, center, inner, outer, rotation, translation)
}

/// Warps the image by inverse mapping and moves minutiae forward through the
/// field; minutiae leaving the frame are dropped.
pub fn apply_deformation(
    image: &Array2<f64>,
    minutiae: &MinutiaSet,
    field: &DeformationField,
) -> Result<(Array2<f64>, MinutiaSet)> {
    if field.dx.dim() != image.dim() {
        return Err(Error::Contract(format!(
            "deformation field {:?} does not match image {:?}",
            field.dx.dim(),
            image.dim()
        )));
    }
    if field.is_identity() {
        return Ok((image.clone(), minutiae.clone()));
    }
    let (h, w) = image.dim();
    let warped = Array2::from_shape_fn((h, w), |(r, c)| {
        let (px, py) = field.inverse(c as f64, r as f64);
        raster::sample_bilinear(image, px, py, Border::Clamp).clamp(0.0, 1.0)
    });
    let items = minutiae
        .items
        .iter()
        .filter_map(|m| {
            let (dx, dy) = field.displacement(m.x, m.y);
            let (x, y) = (m.x + dx, m.y + dy);
            let inside = x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64;
            let turn = field.rotation * field.weight_at(m.x, m.y);
            inside.then(|| Minutia::new(x, y, normalize_angle(m.theta + turn), m.kind))
        })
        .collect();
    Ok((warped, MinutiaSet::new(items, minutiae.image_ref.clone())))
}

/// Which stages fired, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Gates {
    pub contrast: bool,
    pub noise: bool,
    pub deform: bool,
    pub morph: bool,
}

pub fn sample_gates(config: &AugmentConfig, rng: &mut impl Rng) -> Gates {
    Gates {
        contrast: rng.random_bool(config.p_contrast),
        noise: rng.random_bool(config.p_noise),
        deform: rng.random_bool(config.p_deform),
        morph: rng.random_bool(config.p_morph),
    }
}

/// Contrast → noise → deformation → morphology, each gated independently.
pub fn augment_pipeline(
    image: &Array2<f64>,
    minutiae: &MinutiaSet,
    config: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<(Array2<f64>, MinutiaSet, Gates)> {
    let gates = sample_gates(config, rng);
    let mut img = image.clone();
    let mut mins = minutiae.clone();
    if gates.contrast {
        img = random_contrast(&img, config, rng);
    }
    if gates.noise {
        img = random_noise(&img, config, rng);
    }
    if gates.deform {
        let field = make_deformation_field(img.dim(), &config.deform, rng)?;
        (img, mins) = apply_deformation(&img, &mins, &field)?;
    }
    if gates.morph {
        img = random_morphology(&img, config, rng).0;
    }
    Ok((img, mins, gates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::MinutiaKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ridges() -> Array2<f64> {
        Array2::from_shape_fn((64, 64), |(r, c)| 0.5 + 0.4 * ((r as f64 * 0.7 + c as f64 * 0.3).sin()))
    }

    #[test]
    fn contrast_identity_and_power_law() {
        let img = ridges();
        assert_eq!(apply_contrast(&img, 1.0, 1.0), img);
        let half = Array2::from_elem((4, 4), 0.5);
        assert!(apply_contrast(&half, 1.0, 2.0).iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(apply_contrast(&half, 1.2, 2.0).iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = AugmentConfig {
            contrast_gain_range: (2.0, 3.0),
            ..Default::default()
        };
        for _ in 0..20 {
            let out = random_contrast(&img, &cfg, &mut rng);
            assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn noise_moments_and_determinism() {
        let flat = Array2::from_elem((256, 256), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(apply_noise(&flat, 0.0, &mut rng), flat);
        let out = apply_noise(&flat, 0.05, &mut rng);
        let mean = out.mean().unwrap();
        let std = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / out.len() as f64).sqrt();
        assert!((mean - 0.5).abs() < 0.002);
        assert!((std - 0.05).abs() < 0.005);
        let a = apply_noise(&flat, 0.05, &mut ChaCha8Rng::seed_from_u64(9));
        let b = apply_noise(&flat, 0.05, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn morphology_area_bounds_on_256() {
        assert_eq!(morph_area_bounds(256, 256, (0.0002, 0.002)), (14, 131));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let p = draw_patch(256, 256, (0.0002, 0.002), &mut rng).unwrap();
            assert!((14..=131).contains(&p.area()), "area {}", p.area());
            assert!(p.row + p.rows <= 256 && p.col + p.cols <= 256);
        }
        assert!(draw_patch(256, 256, (0.0, 0.0), &mut rng).is_none());
    }

    #[test]
    fn morphology_is_local_and_monotone() {
        let img = Array2::from_shape_fn((64, 64), |(r, c)| if (r + 2 * c) % 5 < 2 { 1.0 } else { 0.0 });
        let patch = Patch {
            row: 10,
            col: 20,
            rows: 6,
            cols: 9,
        };
        let dil = apply_morphology(&img, patch, MorphOp::Dilate);
        let ero = apply_morphology(&img, patch, MorphOp::Erode);
        let mean_in = |a: &Array2<f64>| {
            let mut s = 0.0;
            for r in 10..16 {
                for c in 20..29 {
                    s += a[[r, c]];
                }
            }
            s
        };
        assert!(mean_in(&dil) >= mean_in(&img));
        assert!(mean_in(&ero) <= mean_in(&img));
        for ((r, c), v) in dil.indexed_iter() {
            if !patch.contains(r, c) {
                assert_eq!(v.to_bits(), img[[r, c]].to_bits());
            }
        }
    }

    #[test]
    fn deformation_profile_examples() {
        let field = DeformationField::new((64, 64), (32.0, 32.0), 10.0, 30.0, 0.0, (0.0, 0.0)).unwrap();
        assert!(field.dx.iter().chain(field.dy.iter()).all(|&v| v == 0.0));

        let field = DeformationField::new((64, 64), (32.0, 32.0), 10.0, 30.0, 0.0, (10.0, 0.0)).unwrap();
        assert_eq!(field.displacement(42.0, 32.0), (0.0, 0.0));
        let (dx, dy) = field.displacement(52.0, 32.0);
        assert!((dx - 5.0).abs() < 1e-12 && dy.abs() < 1e-12);
        let (dx, _) = field.displacement(63.0, 63.0);
        assert!((dx - 10.0).abs() < 1e-12);

        assert!(matches!(
            DeformationField::new((8, 8), (4.0, 4.0), 5.0, 5.0, 0.0, (1.0, 0.0)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn deformation_moves_minutiae_consistently() {
        let field = DeformationField::new((128, 128), (64.0, 64.0), 20.0, 40.0, 0.0, (10.0, 0.0)).unwrap();
        let set = MinutiaSet::new(
            vec![
                Minutia::new(70.0, 60.0, 1.0, MinutiaKind::Ending),
                Minutia::new(64.0, 110.0, 2.0, MinutiaKind::Ending),
                Minutia::new(125.0, 64.0, 2.0, MinutiaKind::Ending),
            ],
            "t",
        );
        let (_, moved) = apply_deformation(&Array2::from_elem((128, 128), 0.5), &set, &field).unwrap();
        assert_eq!(moved.len(), 2, "the minutia pushed past the right edge is dropped");
        assert_eq!((moved.items[0].x, moved.items[0].y), (70.0, 60.0));
        assert!((moved.items[1].x - 74.0).abs() < 0.5);
    }

    #[test]
    fn zero_field_is_identity() {
        let img = ridges();
        let set = MinutiaSet::new(vec![Minutia::new(3.0, 4.0, 0.5, MinutiaKind::Ending)], "t");
        let field = DeformationField::new((64, 64), (32.0, 32.0), 5.0, 20.0, 0.0, (0.0, 0.0)).unwrap();
        let (out, mins) = apply_deformation(&img, &set, &field).unwrap();
        assert_eq!(out, img);
        assert_eq!(mins, set);
    }

    #[test]
    fn pipeline_with_zero_probabilities_is_identity() {
        let img = ridges();
        let set = MinutiaSet::new(vec![Minutia::new(3.0, 4.0, 0.5, MinutiaKind::Ending)], "t");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (out, mins, gates) = augment_pipeline(&img, &set, &AugmentConfig::disabled(), &mut rng).unwrap();
        assert_eq!(out, img);
        assert_eq!(mins, set);
        assert_eq!(gates, Gates::default());
    }

    #[test]
    fn config_validation_names_fields() {
        let bad = AugmentConfig {
            p_noise: 1.5,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().0, "p_noise");
        let mut bad = AugmentConfig::default();
        bad.deform.inner_radius = 0.5;
        assert_eq!(bad.validate().unwrap_err().0, "deform.inner_radius");
        assert!(AugmentConfig::default().validate().is_ok());
    }
}
