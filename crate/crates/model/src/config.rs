//! Model and training configuration.

use std::f64::consts::PI;
use std::path::PathBuf;

use fpembed_core::augment::AugmentConfig;
use fpembed_core::preprocess::{band_len, EnhanceMethod};
use fpembed_core::MapParams;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Source of the attention mask fed to the texture MAM head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    /// The network's own estimated minutia map.
    #[default]
    Estimated,
    /// The ground-truth map (training only; inference falls back to the estimate).
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_side: usize,
    /// Localization network widths of its three stride-2 blocks.
    pub stn_widths: [usize; 3],
    /// Stem and the two shared residual stages.
    pub trunk_widths: [usize; 3],
    /// Texture branch stages; the last width is `C_L`.
    pub texture_widths: [usize; 2],
    pub minutia_widths: [usize; 2],
    pub decoder_widths: [usize; 2],
    /// Stem plus three residual stages of the frequency branch.
    pub frequency_widths: [usize; 4],
    pub blocks_per_stage: usize,
    /// Branch feature dimension `K`.
    pub feature_dim: usize,
    /// Training class count `C'`.
    pub class_count: usize,
    pub map_channels: usize,
    pub map_sigma_s: f64,
    pub map_sigma_a: f64,
    pub band_fraction: f64,
    pub elliptical_mask: bool,
    pub use_mam: bool,
    pub use_frequency: bool,
    pub mask_source: MaskSource,
    pub rotation_bound: f64,
    /// Upper bound on GroupNorm groups per layer.
    pub norm_groups: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_side: 256,
            stn_widths: [8, 16, 32],
            trunk_widths: [64, 128, 256],
            texture_widths: [512, 1024],
            minutia_widths: [256, 512],
            decoder_widths: [128, 64],
            frequency_widths: [32, 64, 128, 256],
            blocks_per_stage: 2,
            feature_dim: 512,
            class_count: 1000,
            map_channels: 6,
            map_sigma_s: 4.0,
            map_sigma_a: PI / 6.0,
            band_fraction: 0.5,
            elliptical_mask: false,
            use_mam: true,
            use_frequency: true,
            mask_source: MaskSource::Estimated,
            rotation_bound: PI,
            norm_groups: 8,
        }
    }
}

impl ModelConfig {
    /// Narrow network for single-core CPU runs on small synthetic datasets.
    pub fn smoke(class_count: usize) -> Self {
        Self {
            stn_widths: [4, 8, 8],
            trunk_widths: [8, 16, 16],
            texture_widths: [32, 64],
            minutia_widths: [32, 32],
            decoder_widths: [16, 8],
            frequency_widths: [8, 16, 16, 32],
            blocks_per_stage: 1,
            feature_dim: 32,
            class_count,
            norm_groups: 4,
            ..Self::default()
        }
    }

    /// `C_L`, channels of the texture feature map.
    pub fn texture_channels(&self) -> usize {
        self.texture_widths[1]
    }

    /// Side of the texture feature map (`H_L = W_L`).
    pub fn texture_side(&self) -> usize {
        self.input_side / 16
    }

    pub fn map_side(&self) -> usize {
        self.input_side / 2
    }

    pub fn branch_count(&self) -> usize {
        if self.use_frequency {
            3
        } else {
            2
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.branch_count() * self.feature_dim
    }

    pub fn map_params(&self) -> MapParams {
        MapParams {
            map_side: self.map_side(),
            channels: self.map_channels,
            sigma_s: self.map_sigma_s,
            sigma_a: self.map_sigma_a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: String| Err(ModelError::config(format!("model.{f}"), m));
        if self.input_side < 32 || self.input_side % 16 != 0 {
            return bad("input_side", format!("{} must be a multiple of 16 and at least 32", self.input_side));
        }
        let widths = [
            ("stn_widths", &self.stn_widths[..]),
            ("trunk_widths", &self.trunk_widths[..]),
            ("texture_widths", &self.texture_widths[..]),
            ("minutia_widths", &self.minutia_widths[..]),
            ("decoder_widths", &self.decoder_widths[..]),
            ("frequency_widths", &self.frequency_widths[..]),
        ];
        for (name, w) in widths {
            if w.contains(&0) {
                return bad(name, "all widths must be at least 1".into());
            }
        }
        if self.blocks_per_stage == 0 {
            return bad("blocks_per_stage", "need at least one block per stage".into());
        }
        if self.feature_dim == 0 || self.feature_dim > self.texture_channels() {
            return bad(
                "feature_dim",
                format!("K = {} must lie in [1, C_L = {}]", self.feature_dim, self.texture_channels()),
            );
        }
        if self.class_count < 2 {
            return bad("class_count", format!("C' = {} must be at least 2", self.class_count));
        }
        if self.map_channels == 0 {
            return bad("map_channels", "need at least one channel".into());
        }
        if !(self.map_sigma_s > 0.0) || !(self.map_sigma_a > 0.0) {
            return bad("map_sigma_s", "map spreads must be positive".into());
        }
        if self.norm_groups == 0 {
            return bad("norm_groups", "need at least one group".into());
        }
        if !(self.rotation_bound > 0.0 && self.rotation_bound <= PI) {
            return bad("rotation_bound", format!("{} must lie in (0, π]", self.rotation_bound));
        }
        let band = band_len(self.input_side, self.band_fraction)
            .map_err(|e| ModelError::config("model.band_fraction", e.to_string()))?;
        if band < 8 {
            return bad("band_fraction", format!("spectrum crop of {band} bins is too small"));
        }
        Ok(())
    }
}

/// Rows of the ablation table. Each preset adds one refinement to the
/// previous: (A) three branches with softmax heads, (B) AdaCos heads,
/// (C) augmentation, (D) the minutia attention module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    A,
    B,
    C,
    D,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::A, Ablation::B, Ablation::C, Ablation::D];

    /// Sets the four switches; other fields are untouched.
    pub fn apply(self, model: &mut ModelConfig, train: &mut TrainConfig) {
        let rank = self as u8;
        model.use_frequency = true;
        train.use_adacos = rank >= 1;
        train.use_augment = rank >= 2;
        model.use_mam = rank >= 3;
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            "d" => Ok(Self::D),
            other => Err(format!("unknown ablation preset `{other}` (expected a, b, c or d)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Rmsprop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr_features: f64,
    pub lr_stn: f64,
    pub weight_decay: f64,
    pub rmsprop_alpha: f64,
    pub rmsprop_eps: f64,
    pub lambda_map: f64,
    pub rho: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub use_adacos: bool,
    pub use_augment: bool,
    /// Freezes every AdaCos scale at this value instead of adapting it.
    pub adacos_fixed_scale: Option<f64>,
    pub enhance: EnhanceMethod,
    /// Also compute a verification EER over validation pairs each epoch.
    pub validation_eer: bool,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Rmsprop,
            lr_features: 1e-3,
            lr_stn: 5e-4,
            weight_decay: 1e-5,
            rmsprop_alpha: 0.99,
            rmsprop_eps: 1e-8,
            lambda_map: 10.0,
            rho: 100.0,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            use_adacos: true,
            use_augment: true,
            adacos_fixed_scale: None,
            enhance: EnhanceMethod::default(),
            validation_eer: false,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: String| Err(ModelError::config(format!("train.{f}"), m));
        for (name, lr) in [("lr_features", self.lr_features), ("lr_stn", self.lr_stn)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(name, format!("learning rate {lr} must be positive"));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay", format!("{} must be nonnegative", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.rmsprop_alpha) {
            return bad("rmsprop_alpha", format!("{} must lie in [0, 1)", self.rmsprop_alpha));
        }
        if !(self.rmsprop_eps > 0.0) {
            return bad("rmsprop_eps", "must be positive".into());
        }
        if !(self.lambda_map >= 0.0) || !(self.rho >= 0.0) {
            return bad("lambda_map", "loss weights must be nonnegative".into());
        }
        if self.batch_size < 2 {
            return bad("batch_size", format!("{} is below 2", self.batch_size));
        }
        if self.epochs == 0 {
            return bad("epochs", "need at least one epoch".into());
        }
        if let Some(s) = self.adacos_fixed_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad("adacos_fixed_scale", format!("{s} must be positive"));
            }
        }
        Ok(())
    }
}

pub fn validate_augment(cfg: &AugmentConfig) -> Result<()> {
    cfg.validate()
        .map_err(|(field, msg)| ModelError::config(format!("augment.{field}"), msg))
}
