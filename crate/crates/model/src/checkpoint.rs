//! Checkpoint archive: one safetensors file.
//!
//! Tensors: `model.<param>` for weights (including class weights) and
//! `optim.<param>` for the RMSProp square averages. Metadata keys:
//! `format_version`, `model_config`, `train_config`, `augment_config`,
//! `heads` (AdaCos scales), `epoch`, `optim_steps`, `history`; structured
//! values are JSON.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use fpembed_core::augment::AugmentConfig;
use safetensors::SafeTensors;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, TrainConfig};
use crate::error::{ModelError, Result};
use crate::losses::ClassHead;
use crate::model::EmbeddingModel;
use crate::optim::{RmsProp, RmsPropConfig};
use crate::trainer::EpochMetrics;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadState {
    pub scale: f64,
    pub update_count: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub augment_config: AugmentConfig,
    pub epoch: usize,
    pub history: Vec<EpochMetrics>,
    pub weights: BTreeMap<String, Tensor>,
    pub heads: BTreeMap<String, HeadState>,
    pub optim_state: BTreeMap<String, Tensor>,
    pub optim_steps: u64,
}

fn bad(path: &Path, message: impl Into<String>) -> ModelError {
    ModelError::Checkpoint {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl Checkpoint {
    /// Snapshot of a model (weights copied, detached from the graph).
    pub fn capture(
        model: &EmbeddingModel,
        optim: Option<&RmsProp>,
        train_config: &TrainConfig,
        augment_config: &AugmentConfig,
        epoch: usize,
        history: Vec<EpochMetrics>,
    ) -> Result<Self> {
        let weights = model
            .net
            .params()
            .iter()
            .map(|(n, v)| Ok((n.clone(), v.as_tensor().detach().copy()?)))
            .collect::<Result<_>>()?;
        let heads = model
            .heads
            .iter()
            .filter_map(|(n, h)| match h {
                ClassHead::AdaCos(a) => Some((
                    n.to_string(),
                    HeadState {
                        scale: a.scale,
                        update_count: a.update_count,
                    },
                )),
                ClassHead::Softmax(_) => None,
            })
            .collect();
        let (optim_state, optim_steps) = match optim {
            Some(o) => (
                o.state().iter().map(|(k, v)| Ok((k.clone(), v.copy()?))).collect::<Result<_>>()?,
                o.step_count,
            ),
            None => (BTreeMap::new(), 0),
        };
        Ok(Self {
            model_config: model.config().clone(),
            train_config: train_config.clone(),
            augment_config: augment_config.clone(),
            epoch,
            history,
            weights,
            heads,
            optim_state,
            optim_steps,
        })
    }

    /// Rebuilds the model with the stored weights and head scales.
    pub fn build_model(&self, device: &Device) -> Result<EmbeddingModel> {
        let dtype = self.weights.values().next().map(|t| t.dtype()).unwrap_or(DType::F32);
        let mut model = EmbeddingModel::new(&self.model_config, self.train_config.use_adacos, 0, dtype, device)?;
        model.net.params().load(&self.weights)?;
        for (name, head) in model.heads.iter_mut() {
            if let (ClassHead::AdaCos(a), Some(s)) = (head, self.heads.get(name)) {
                a.scale = s.scale;
                a.update_count = s.update_count;
            }
        }
        Ok(model)
    }

    pub fn build_optimizer(&self, config: RmsPropConfig) -> RmsProp {
        let mut o = RmsProp::new(config);
        o.restore(self.optim_state.clone(), self.optim_steps);
        o
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut meta = HashMap::new();
        meta.insert("format_version".to_string(), FORMAT_VERSION.to_string());
        meta.insert("model_config".to_string(), serde_json::to_string(&self.model_config)?);
        meta.insert("train_config".to_string(), serde_json::to_string(&self.train_config)?);
        meta.insert("augment_config".to_string(), serde_json::to_string(&self.augment_config)?);
        meta.insert("heads".to_string(), serde_json::to_string(&self.heads)?);
        meta.insert("epoch".to_string(), self.epoch.to_string());
        meta.insert("optim_steps".to_string(), self.optim_steps.to_string());
        meta.insert("history".to_string(), serde_json::to_string(&self.history)?);
        let tensors: Vec<(String, &Tensor)> = self
            .weights
            .iter()
            .map(|(k, v)| (format!("model.{k}"), v))
            .chain(self.optim_state.iter().map(|(k, v)| (format!("optim.{k}"), v)))
            .collect();
        Ok(safetensors::tensor::serialize(tensors, Some(meta))?)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let (_, header) = SafeTensors::read_metadata(bytes).map_err(|e| bad(path, e.to_string()))?;
        let meta = header.metadata().clone().ok_or_else(|| bad(path, "no metadata"))?;
        let field = |k: &str| meta.get(k).ok_or_else(|| bad(path, format!("metadata lacks `{k}`")));
        let version: u32 = field("format_version")?.parse().map_err(|_| bad(path, "bad format_version"))?;
        if version != FORMAT_VERSION {
            return Err(bad(path, format!("format version {version}, expected {FORMAT_VERSION}")));
        }
        let json = |k: &str| -> Result<serde_json::Value> { Ok(serde_json::from_str(field(k)?)?) };
        let model_config: ModelConfig = serde_json::from_value(json("model_config")?)?;
        let train_config: TrainConfig = serde_json::from_value(json("train_config")?)?;
        let augment_config: AugmentConfig = serde_json::from_value(json("augment_config")?)?;
        let heads = serde_json::from_value(json("heads")?)?;
        let history = serde_json::from_value(json("history")?)?;
        let epoch = field("epoch")?.parse().map_err(|_| bad(path, "bad epoch"))?;
        let optim_steps = field("optim_steps")?.parse().map_err(|_| bad(path, "bad optim_steps"))?;
        let all = candle_core::safetensors::load_buffer(bytes, &Device::Cpu)?;
        let mut weights = BTreeMap::new();
        let mut optim_state = BTreeMap::new();
        for (name, t) in all {
            if let Some(n) = name.strip_prefix("model.") {
                weights.insert(n.to_string(), t);
            } else if let Some(n) = name.strip_prefix("optim.") {
                optim_state.insert(n.to_string(), t);
            } else {
                return Err(bad(path, format!("unexpected tensor `{name}`")));
            }
        }
        Ok(Self {
            model_config,
            train_config,
            augment_config,
            epoch,
            history,
            weights,
            heads,
            optim_state,
            optim_steps,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| bad(path, e.to_string()))?;
        Self::from_bytes(&bytes, path)
    }
}
