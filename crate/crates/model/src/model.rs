//! Network plus per-branch classification heads.

use candle_core::{DType, Device, Tensor};
use fpembed_core::FingerprintEmbedding;

use crate::config::ModelConfig;
use crate::error::Result;
use crate::losses::ClassHead;
use crate::network::{batch_embeddings, BranchOutputs, FingerprintNet, Mode};

#[derive(Debug, Clone)]
pub struct ClassHeads {
    pub texture: ClassHead,
    pub minutia: ClassHead,
    pub frequency: Option<ClassHead>,
}

impl ClassHeads {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &ClassHead)> {
        [("texture", Some(&self.texture)), ("minutia", Some(&self.minutia)), ("frequency", self.frequency.as_ref())]
            .into_iter()
            .filter_map(|(n, h)| h.map(|h| (n, h)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&'static str, &mut ClassHead)> {
        [
            ("texture", Some(&mut self.texture)),
            ("minutia", Some(&mut self.minutia)),
            ("frequency", self.frequency.as_mut()),
        ]
        .into_iter()
        .filter_map(|(n, h)| h.map(|h| (n, h)))
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub net: FingerprintNet,
    pub heads: ClassHeads,
}

impl EmbeddingModel {
    pub fn new(config: &ModelConfig, use_adacos: bool, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        let mut net = FingerprintNet::new(config, seed, dtype, device)?;
        let (k, c) = (config.feature_dim, config.class_count);
        let p = net.params_mut();
        let heads = ClassHeads {
            texture: ClassHead::new(p, "texture", k, c, use_adacos)?,
            minutia: ClassHead::new(p, "minutia", k, c, use_adacos)?,
            frequency: if config.use_frequency {
                Some(ClassHead::new(p, "frequency", k, c, use_adacos)?)
            } else {
                None
            },
        };
        Ok(Self { net, heads })
    }

    pub fn config(&self) -> &ModelConfig {
        self.net.config()
    }

    pub fn uses_adacos(&self) -> bool {
        matches!(self.heads.texture, ClassHead::AdaCos(_))
    }

    /// Inference forward on a `(B, 1, S, S)` batch.
    pub fn infer(&self, images: &Tensor) -> Result<BranchOutputs> {
        self.net.forward(images, Mode::Infer, None)
    }

    pub fn embed(&self, images: &Tensor) -> Result<Vec<FingerprintEmbedding>> {
        batch_embeddings(&self.infer(images)?)
    }
}
