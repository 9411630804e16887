//! The multi-task embedding network.
//!
//! ```text
//! image ─ STN ─┬─ trunk (S/8) ─┬─ texture stages ─ X_L (C_L, S/16) ─ GAP | MAM ─ t_tex
//!              │               └─ minutia stage 1 (S/8) ─┬─ stage 2 ─ GAP ─ affine ─ t_min
//!              │                                         └─ decoder ─ H_e (6, S/2)
//!              └─ band DFT (2, S/2) ─ frequency stages ─ GAP ─ affine ─ t_freq
//! ```

use candle_core::{DType, Device, Tensor};
use fpembed_core::FingerprintEmbedding;

use crate::config::{MaskSource, ModelConfig};
use crate::error::{ModelError, Result};
use crate::heads::{GapHead, MamHead, MaskBuilder};
use crate::layers::{global_average_pool, softplus, Conv2d, ConvBlock, Linear, Stage, UpBlock};
use crate::params::ParamStore;
use crate::spectrum::BandDft;
use crate::stn::{rotate_bilinear, Localizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-batch outputs of [`FingerprintNet::forward`].
#[derive(Debug, Clone)]
pub struct BranchOutputs {
    /// `(B, K)` texture feature (attention-pooled when MAM is on).
    pub t_tex: Tensor,
    pub t_min: Tensor,
    pub t_freq: Option<Tensor>,
    /// Estimated minutia map `(B, channels, S/2, S/2)`, nonnegative.
    pub h_e: Tensor,
    /// Estimated rotation per image, `(B,)`.
    pub theta: Tensor,
    /// Texture feature map `(B, C_L, H_L, W_L)`.
    pub x_l: Tensor,
    /// Attention mask used by MAM, `(B, H_L, W_L)`.
    pub mask: Option<Tensor>,
}

#[derive(Debug, Clone)]
enum TextureHead {
    Gap(GapHead),
    Mam(MamHead),
}

#[derive(Debug, Clone)]
struct FrequencyBranch {
    dft: BandDft,
    stem: ConvBlock,
    stages: Vec<Stage>,
    fc: Linear,
}

#[derive(Debug, Clone)]
pub struct FingerprintNet {
    config: ModelConfig,
    params: ParamStore,
    stn: Localizer,
    stem: ConvBlock,
    trunk: [Stage; 2],
    texture: [Stage; 2],
    texture_head: TextureHead,
    minutia: [Stage; 2],
    minutia_fc: Linear,
    decoder: [UpBlock; 2],
    decoder_out: Conv2d,
    frequency: Option<FrequencyBranch>,
    mask_builder: MaskBuilder,
}

impl FingerprintNet {
    pub fn new(config: &ModelConfig, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        config.validate()?;
        let c = config;
        let g = c.norm_groups;
        let n = c.blocks_per_stage;
        let mut p = ParamStore::new(seed, dtype, device.clone());
        let stn = Localizer::new(&mut p, c.stn_widths, g, c.rotation_bound)?;
        let [w0, w1, w2] = c.trunk_widths;
        let stem = ConvBlock::new(&mut p, "trunk.stem", 1, w0, 2, g)?;
        let trunk = [
            Stage::new(&mut p, "trunk.stage0", w0, w1, 2, n, g)?,
            Stage::new(&mut p, "trunk.stage1", w1, w2, 2, n, g)?,
        ];
        let [t0, t1] = c.texture_widths;
        let texture = [
            Stage::new(&mut p, "texture.stage0", w2, t0, 2, n, g)?,
            Stage::new(&mut p, "texture.stage1", t0, t1, 1, n, g)?,
        ];
        let texture_head = if c.use_mam {
            TextureHead::Mam(MamHead::new(&mut p, t1, c.class_count, c.feature_dim)?)
        } else {
            TextureHead::Gap(GapHead::new(&mut p, t1, c.feature_dim)?)
        };
        let [m0, m1] = c.minutia_widths;
        let minutia = [
            Stage::new(&mut p, "minutia.stage0", w2, m0, 1, n, g)?,
            Stage::new(&mut p, "minutia.stage1", m0, m1, 2, n, g)?,
        ];
        let minutia_fc = Linear::new(&mut p, "minutia.fc", m1, c.feature_dim, true)?;
        let [d0, d1] = c.decoder_widths;
        let decoder = [
            UpBlock::new(&mut p, "decoder.up0", m0, d0, g)?,
            UpBlock::new(&mut p, "decoder.up1", d0, d1, g)?,
        ];
        let decoder_out = Conv2d::new(&mut p, "decoder.out", d1, c.map_channels, 1, 1, true)?;
        let frequency = if c.use_frequency {
            let [f0, f1, f2, f3] = c.frequency_widths;
            Some(FrequencyBranch {
                dft: BandDft::new(c.input_side, c.band_fraction, c.elliptical_mask, dtype, device)?,
                stem: ConvBlock::new(&mut p, "frequency.stem", 2, f0, 2, g)?,
                stages: vec![
                    Stage::new(&mut p, "frequency.stage0", f0, f1, 2, n, g)?,
                    Stage::new(&mut p, "frequency.stage1", f1, f2, 2, n, g)?,
                    Stage::new(&mut p, "frequency.stage2", f2, f3, 2, n, g)?,
                ],
                fc: Linear::new(&mut p, "frequency.fc", f3, c.feature_dim, true)?,
            })
        } else {
            None
        };
        let side = c.texture_side();
        let mask_builder = MaskBuilder::new(c.map_side(), (side, side), dtype, device)?;
        Ok(Self {
            config: c.clone(),
            params: p,
            stn,
            stem,
            trunk,
            texture,
            texture_head,
            minutia,
            minutia_fc,
            decoder,
            decoder_out,
            frequency,
            mask_builder,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn dtype(&self) -> DType {
        self.params.dtype()
    }

    pub fn device(&self) -> &Device {
        self.params.device()
    }

    pub fn mam(&self) -> Option<&MamHead> {
        match &self.texture_head {
            TextureHead::Mam(m) => Some(m),
            TextureHead::Gap(_) => None,
        }
    }

    pub fn mask_builder(&self) -> &MaskBuilder {
        &self.mask_builder
    }

    /// Runs the aligned-image pipeline. `images` is `(B, 1, S, S)` in the
    /// model dtype. `gt_maps` feeds the attention mask only in train mode
    /// with a ground-truth mask source.
    pub fn forward(&self, images: &Tensor, mode: Mode, gt_maps: Option<&Tensor>) -> Result<BranchOutputs> {
        let (_, ch, h, w) = images.dims4()?;
        let s = self.config.input_side;
        if (ch, h, w) != (1, s, s) {
            return Err(ModelError::Contract(format!(
                "network expects (B, 1, {s}, {s}) input, got {:?}",
                images.dims()
            )));
        }
        let theta = self.stn.forward(images)?;
        let aligned = rotate_bilinear(images, &theta)?;
        self.forward_aligned(&aligned, theta, mode, gt_maps)
    }

    /// Everything after the spatial transformer.
    pub fn forward_aligned(
        &self,
        aligned: &Tensor,
        theta: Tensor,
        mode: Mode,
        gt_maps: Option<&Tensor>,
    ) -> Result<BranchOutputs> {
        let mut shared = self.stem.forward(aligned)?;
        for st in &self.trunk {
            shared = st.forward(&shared)?;
        }
        let x_l = self.texture[1].forward(&self.texture[0].forward(&shared)?)?;

        let mid = self.minutia[0].forward(&shared)?;
        let deep = self.minutia[1].forward(&mid)?;
        let t_min = self.minutia_fc.forward(&global_average_pool(&deep)?)?;
        let mut up = mid;
        for d in &self.decoder {
            up = d.forward(&up)?;
        }
        let h_e = softplus(&self.decoder_out.forward(&up)?)?;

        let (t_tex, mask) = match &self.texture_head {
            TextureHead::Gap(head) => (head.forward(&x_l)?, None),
            TextureHead::Mam(head) => {
                let source = match (mode, self.config.mask_source, gt_maps) {
                    (Mode::Train, MaskSource::GroundTruth, Some(gt)) => gt.clone(),
                    _ => h_e.clone(),
                };
                let mask = self.mask_builder.forward(&source)?;
                (head.forward(&x_l, &mask)?.feature, Some(mask))
            }
        };

        let t_freq = match &self.frequency {
            Some(f) => {
                let mut z = f.stem.forward(&f.dft.forward(aligned)?)?;
                for st in &f.stages {
                    z = st.forward(&z)?;
                }
                Some(f.fc.forward(&global_average_pool(&z)?)?)
            }
            None => None,
        };
        Ok(BranchOutputs {
            t_tex,
            t_min,
            t_freq,
            h_e,
            theta,
            x_l,
            mask,
        })
    }
}

/// Normalizes each enabled branch feature, concatenates them in the order
/// texture, minutia, frequency, and renormalizes. `row` selects the image in
/// the batch.
pub fn assemble_embedding(outputs: &BranchOutputs, row: usize) -> Result<FingerprintEmbedding> {
    let mut parts: Vec<(&str, &Tensor)> = vec![("texture", &outputs.t_tex), ("minutia", &outputs.t_min)];
    if let Some(f) = &outputs.t_freq {
        parts.push(("frequency", f));
    }
    let mut raw = Vec::new();
    for (name, t) in parts {
        let v: Vec<f64> = t.get(row)?.to_dtype(DType::F64)?.to_vec1()?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(ModelError::Numerical(format!("{name} branch feature has norm {norm}")));
        }
        raw.extend(v.iter().map(|x| x / norm));
    }
    Ok(FingerprintEmbedding::from_raw(&raw)?)
}

/// Embeddings for every image of a batch.
pub fn batch_embeddings(outputs: &BranchOutputs) -> Result<Vec<FingerprintEmbedding>> {
    let b = outputs.t_tex.dim(0)?;
    (0..b).map(|i| assemble_embedding(outputs, i)).collect()
}
