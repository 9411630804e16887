//! Minutia-map regression, AdaCos and softmax classification heads, and the
//! combined multi-task objective.

use std::f64::consts::FRAC_PI_4;

use candle_core::{DType, Tensor, D};
use fpembed_core::MinutiaMap;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::layers::Linear;
use crate::network::Mode;
use crate::params::ParamStore;

/// `Σ_{k,i,j} ρ·(H_g − H_e)²` for a single pair of maps.
pub fn minutia_map_loss(hg: &MinutiaMap, he: &MinutiaMap, rho: f64) -> Result<f64> {
    if hg.values.dim() != he.values.dim() {
        return Err(ModelError::Contract(format!(
            "map shapes differ: {:?} vs {:?}",
            hg.values.dim(),
            he.values.dim()
        )));
    }
    let sq: f64 = hg.values.iter().zip(he.values.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(rho * sq)
}

/// Batched map loss on `(B, C, S, S)` tensors: the per-image sum, averaged
/// over the batch.
pub fn minutia_map_loss_tensor(hg: &Tensor, he: &Tensor, rho: f64) -> Result<Tensor> {
    if hg.dims() != he.dims() {
        return Err(ModelError::Contract(format!("map shapes differ: {:?} vs {:?}", hg.dims(), he.dims())));
    }
    let b = hg.dim(0)?;
    Ok(((hg - he)?.sqr()?.sum_all()? * (rho / b as f64))?)
}

/// Row-wise unit normalization of a `(N, K)` tensor.
fn normalize_rows(x: &Tensor) -> Result<Tensor> {
    Ok(x.broadcast_div(&x.sqr()?.sum_keepdim(1)?.sqrt()?)?)
}

fn row_norms(x: &Tensor) -> Result<Vec<f64>> {
    Ok(x.to_dtype(DType::F64)?.sqr()?.sum(1)?.sqrt()?.to_vec1()?)
}

/// Batch statistics behind one dynamic scale update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleUpdate {
    pub previous: f64,
    /// Mean over samples of `Σ_{k≠y} exp(previous · cos θ_k)`.
    pub b_avg: f64,
    /// Median target angle (lower median for even batch sizes).
    pub theta_med: f64,
    pub scale: f64,
}

/// The dynamic AdaCos scale rule on a `(N, C)` cosine table.
pub fn adacos_scale_update(cosines: &[Vec<f64>], labels: &[usize], previous: f64) -> ScaleUpdate {
    let n = cosines.len().max(1) as f64;
    let b_avg = cosines
        .iter()
        .zip(labels)
        .map(|(row, &y)| {
            row.iter()
                .enumerate()
                .filter(|&(k, _)| k != y)
                .map(|(_, &c)| (previous * c).exp())
                .sum::<f64>()
        })
        .sum::<f64>()
        / n;
    let mut thetas: Vec<f64> = cosines
        .iter()
        .zip(labels)
        .map(|(row, &y)| row[y].clamp(-1.0, 1.0).acos())
        .collect();
    thetas.sort_by(f64::total_cmp);
    let theta_med = thetas[(thetas.len() - 1) / 2];
    let candidate = b_avg.ln() / theta_med.min(FRAC_PI_4).cos();
    let scale = if candidate > 0.0 && candidate.is_finite() {
        candidate
    } else {
        previous
    };
    ScaleUpdate {
        previous,
        b_avg,
        theta_med,
        scale,
    }
}

/// Initial AdaCos scale `√2 · ln(C' − 1)`.
pub fn initial_scale(classes: usize) -> f64 {
    std::f64::consts::SQRT_2 * ((classes as f64 - 1.0).max(1.0 + 1e-12)).ln()
}

/// Adaptive-scale cosine classifier.
#[derive(Debug, Clone)]
pub struct AdaCosHead {
    name: String,
    weight: Tensor,
    pub scale: f64,
    pub update_count: u64,
    /// Skip the dynamic update and keep `scale` fixed.
    pub frozen: bool,
}

impl AdaCosHead {
    pub fn new(p: &mut ParamStore, name: &str, k: usize, classes: usize) -> Result<Self> {
        let pname = format!("head.{name}.weight");
        let weight = p.normal(&pname, &[classes, k], 1.0)?;
        let head = Self {
            name: pname,
            weight,
            scale: initial_scale(classes),
            update_count: 0,
            frozen: false,
        };
        head.renormalize(p)?;
        Ok(head)
    }

    pub fn param_name(&self) -> &str {
        &self.name
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    /// `(N, K)` features to `(N, C')` cosines; features must be nonzero.
    pub fn cosines(&self, features: &Tensor) -> Result<Tensor> {
        if let Some((i, n)) = row_norms(features)?.into_iter().enumerate().find(|(_, n)| !(*n > 0.0) || !n.is_finite()) {
            return Err(ModelError::Numerical(format!("feature {i} has norm {n}")));
        }
        let f = normalize_rows(features)?;
        let w = normalize_rows(&self.weight)?;
        Ok(f.matmul(&w.t()?)?)
    }

    /// Scaled logits `s · cos θ`. In train mode the scale is re-estimated from
    /// this batch first.
    pub fn logits(&mut self, features: &Tensor, labels: &[usize], mode: Mode) -> Result<(Tensor, Option<ScaleUpdate>)> {
        let cos = self.cosines(features)?;
        let update = if mode == Mode::Train && !self.frozen {
            let table: Vec<Vec<f64>> = cos.detach().to_dtype(DType::F64)?.to_vec2()?;
            let u = adacos_scale_update(&table, labels, self.scale);
            self.scale = u.scale;
            self.update_count += 1;
            Some(u)
        } else {
            None
        };
        Ok(((cos * self.scale)?, update))
    }

    /// Softmax probabilities `P_{i,k}` under the current (or updated) scale.
    pub fn probabilities(&mut self, features: &Tensor, labels: &[usize], mode: Mode) -> Result<Tensor> {
        let (logits, _) = self.logits(features, labels, mode)?;
        Ok(candle_nn::ops::softmax(&logits, D::Minus1)?)
    }

    /// Restores unit rows in the stored class weights.
    pub fn renormalize(&self, p: &ParamStore) -> Result<()> {
        let var = p
            .get(&self.name)
            .ok_or_else(|| ModelError::Contract(format!("missing parameter {}", self.name)))?;
        var.set(&normalize_rows(var.as_tensor())?.detach())?;
        Ok(())
    }

    pub fn max_row_norm_error(&self) -> Result<f64> {
        Ok(row_norms(&self.weight)?.into_iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max))
    }
}

/// Classification head of one branch.
#[derive(Debug, Clone)]
pub enum ClassHead {
    AdaCos(AdaCosHead),
    Softmax(Linear),
}

impl ClassHead {
    pub fn new(p: &mut ParamStore, name: &str, k: usize, classes: usize, adacos: bool) -> Result<Self> {
        Ok(if adacos {
            Self::AdaCos(AdaCosHead::new(p, name, k, classes)?)
        } else {
            Self::Softmax(Linear::new(p, &format!("head.{name}"), k, classes, true)?)
        })
    }

    pub fn logits(&mut self, features: &Tensor, labels: &[usize], mode: Mode) -> Result<(Tensor, Option<ScaleUpdate>)> {
        match self {
            Self::AdaCos(h) => h.logits(features, labels, mode),
            Self::Softmax(l) => Ok((l.forward(features)?, None)),
        }
    }

    pub fn scale(&self) -> Option<f64> {
        match self {
            Self::AdaCos(h) => Some(h.scale),
            Self::Softmax(_) => None,
        }
    }

    pub fn after_step(&self, p: &ParamStore) -> Result<()> {
        if let Self::AdaCos(h) = self {
            h.renormalize(p)?;
        }
        Ok(())
    }
}

pub fn label_tensor(labels: &[usize], dev: &candle_core::Device) -> Result<Tensor> {
    let v: Vec<u32> = labels.iter().map(|&l| l as u32).collect();
    Ok(Tensor::from_vec(v, (labels.len(), 1), dev)?)
}

/// `−(1/N)·Σ log softmax(logits)_{i,y_i}`.
pub fn cross_entropy_logits(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let classes = logits.dim(1)?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(ModelError::Contract(format!("label {bad} outside {classes} classes")));
    }
    let logp = candle_nn::ops::log_softmax(logits, D::Minus1)?;
    let picked = logp.gather(&label_tensor(labels, logits.device())?, 1)?;
    Ok(picked.mean_all()?.neg()?)
}

/// Cross-entropy on explicit probability rows. Zero label probabilities
/// are clamped to `1e-12`; the second value counts the clamps.
pub fn cross_entropy_probabilities(probs: &[Vec<f64>], labels: &[usize]) -> Result<(f64, usize)> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(ModelError::Contract("need one nonempty probability row per label".into()));
    }
    let mut clamped = 0;
    let mut total = 0.0;
    for (row, &y) in probs.iter().zip(labels) {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-5 {
            return Err(ModelError::Contract(format!("probability row sums to {sum}")));
        }
        let p = *row
            .get(y)
            .ok_or_else(|| ModelError::Contract(format!("label {y} outside {} classes", row.len())))?;
        let p = if p < 1e-12 {
            clamped += 1;
            1e-12
        } else {
            p
        };
        total -= p.ln();
    }
    if clamped > 0 {
        log::warn!("{clamped} label probabilities clamped to 1e-12");
    }
    Ok((total / probs.len() as f64, clamped))
}

/// Scalar loss terms of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_t: f64,
    pub l_m: f64,
    pub l_f: f64,
    pub l_map: f64,
    pub l_all: f64,
    pub lambda_map: f64,
}

/// `L_all = L_t + L_m + L_f + λ_map·L_map`.
pub fn total_loss(l_t: f64, l_m: f64, l_f: f64, l_map: f64, lambda_map: f64) -> Result<LossBreakdown> {
    for (name, v) in [("L_t", l_t), ("L_m", l_m), ("L_f", l_f), ("L_map", l_map)] {
        if !(v >= 0.0) {
            return Err(ModelError::Contract(format!("{name} = {v} is negative")));
        }
    }
    Ok(LossBreakdown {
        l_t,
        l_m,
        l_f,
        l_map,
        l_all: l_t + l_m + l_f + lambda_map * l_map,
        lambda_map,
    })
}
