//! Multi-channel minutia maps and the attention masks derived from them.
//!
//! Channel `k` of a map responds to minutiae whose angle is close to the
//! reference angle `2πk/C`:
//!
//! ```text
//! H(k, r, c) = Σ_t exp(-|(c, r) - s·(x_t, y_t)|² / 2σ_s²) · exp(-wrap(θ_t - 2πk/C)² / 2σ_a²)
//! ```
//!
//! where `s = map_side / image_side`. Values are stored as `[k, row, col]`.

use std::f64::consts::{PI, TAU};

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::data_io::{Minutia, MinutiaKind, MinutiaSet};
use crate::error::{Error, Result};
use crate::raster::{self, SampleGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapParams {
    pub map_side: usize,
    pub channels: usize,
    /// Spatial spread in map cells.
    pub sigma_s: f64,
    /// Angular spread in radians.
    pub sigma_a: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            map_side: 128,
            channels: 6,
            sigma_s: 4.0,
            sigma_a: PI / 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinutiaMap {
    pub values: Array3<f64>,
    /// Map cells per input pixel.
    pub scale: f64,
}

impl MinutiaMap {
    pub fn zeros(params: &MapParams, scale: f64) -> Self {
        Self {
            values: Array3::zeros((params.channels, params.map_side, params.map_side)),
            scale,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    /// Per-cell maximum over channels.
    pub fn collapse_max(&self) -> Array2<f64> {
        self.values
            .map_axis(Axis(0), |ch| ch.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Difference `a - b` wrapped into `(-π, π]`.
pub fn wrapped_angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Cells further than this many σ_s contribute less than e^-32.
const CUTOFF_SIGMAS: f64 = 8.0;

pub fn build_minutia_map(minutiae: &MinutiaSet, image_side: usize, params: &MapParams) -> Result<MinutiaMap> {
    if params.map_side == 0 || image_side % params.map_side != 0 {
        return Err(Error::Parameter(format!(
            "map side {} must divide image side {image_side}",
            params.map_side
        )));
    }
    if !(params.sigma_s > 0.0 && params.sigma_a > 0.0) || params.channels == 0 {
        return Err(Error::Parameter("sigma_s, sigma_a and channels must be positive".into()));
    }
    minutiae.check_bounds(image_side, image_side)?;

    let scale = params.map_side as f64 / image_side as f64;
    let mut map = MinutiaMap::zeros(params, scale);
    let n = params.map_side as isize;
    let reach = (CUTOFF_SIGMAS * params.sigma_s).ceil() as isize;
    let inv_s = 1.0 / (2.0 * params.sigma_s * params.sigma_s);
    let inv_a = 1.0 / (2.0 * params.sigma_a * params.sigma_a);
    for m in &minutiae.items {
        let mx = m.x * scale;
        let my = m.y * scale;
        let angular: Vec<f64> = (0..params.channels)
            .map(|k| {
                let reference = TAU * k as f64 / params.channels as f64;
                let d = wrapped_angle_diff(m.theta, reference);
                (-d * d * inv_a).exp()
            })
            .collect();
        let (cr, cc) = (my.round() as isize, mx.round() as isize);
        for r in (cr - reach).max(0)..(cr + reach + 1).min(n) {
            let dy = r as f64 - my;
            for c in (cc - reach).max(0)..(cc + reach + 1).min(n) {
                let dx = c as f64 - mx;
                let spatial = (-(dx * dx + dy * dy) * inv_s).exp();
                for (k, a) in angular.iter().enumerate() {
                    map.values[[k, r as usize, c as usize]] += spatial * a;
                }
            }
        }
    }
    Ok(map)
}

/// Spatial weights in `[0, 1]` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMask {
    pub weights: Array2<f64>,
}

impl AttentionMask {
    pub fn uniform(h: usize, w: usize) -> Self {
        Self {
            weights: Array2::from_elem((h, w), 1.0 / (h * w) as f64),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weights.dim()
    }
}

/// Collapses channels by max, resizes to `target` (pixel-center aligned),
/// clamps at zero and normalizes to unit sum. An all-zero map yields the
/// uniform mask.
pub fn attention_mask_from_map(map: &MinutiaMap, target: (usize, usize)) -> AttentionMask {
    attention_mask_from_values(&map.values, target)
}

pub fn attention_mask_from_values(values: &Array3<f64>, target: (usize, usize)) -> AttentionMask {
    let (th, tw) = (target.0.max(1), target.1.max(1));
    let collapsed = values.map_axis(Axis(0), |ch| ch.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let resized = raster::resample(&collapsed, th, tw, SampleGrid::HalfPixel).mapv(|v| v.max(0.0));
    let total: f64 = resized.sum();
    if !(total > 0.0) || !total.is_finite() {
        return AttentionMask::uniform(th, tw);
    }
    AttentionMask {
        weights: resized.mapv(|v| v / total),
    }
}

/// Diagnostic peak picking: 3×3 local maxima of the collapsed map above
/// `threshold`. Angles are the circular mean of the channel responses.
pub fn detect_peaks(map: &MinutiaMap, threshold: f64) -> MinutiaSet {
    let collapsed = map.collapse_max();
    let (h, w) = collapsed.dim();
    let channels = map.values.dim().0;
    let mut items = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = collapsed[[r, c]];
            if v < threshold {
                continue;
            }
            let mut is_max = true;
            'scan: for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let u = collapsed[[rr as usize, cc as usize]];
                    // ties resolve to the first cell in scan order
                    if u > v || (u == v && (dr < 0 || (dr == 0 && dc < 0))) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let (mut sx, mut sy) = (0.0, 0.0);
            for k in 0..channels {
                let a = TAU * k as f64 / channels as f64;
                sx += map.values[[k, r, c]] * a.cos();
                sy += map.values[[k, r, c]] * a.sin();
            }
            items.push(Minutia::new(
                c as f64 / map.scale,
                r as f64 / map.scale,
                sy.atan2(sx),
                MinutiaKind::Unknown,
            ));
        }
    }
    MinutiaSet::new(items, String::new())
}
