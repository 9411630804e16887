//! Multi-task fingerprint embedding network with its losses, optimizer and
//! trainer, built on `candle`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod extract;
pub mod heads;
pub mod layers;
pub mod losses;
pub mod model;
pub mod network;
pub mod optim;
pub mod params;
pub mod spectrum;
pub mod stn;
pub mod trainer;

pub use config::{Ablation, MaskSource, ModelConfig, TrainConfig};
pub use error::{ModelError, Result};
pub use network::{assemble_embedding, BranchOutputs, FingerprintNet, Mode};
pub use model::EmbeddingModel;
