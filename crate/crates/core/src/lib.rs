//! Fingerprint data handling, preprocessing, minutia maps, augmentation and
//! verification metrics. The network and trainer live in `fpembed-model`.

pub mod augment;
pub mod data_io;
pub mod embedding;
pub mod error;
pub mod evaluate;
pub mod minutia_map;
pub mod preprocess;
pub mod raster;
pub mod synth;

pub use data_io::{DatasetIndex, FingerprintImage, Layout, Minutia, MinutiaKind, MinutiaSet, Record};
pub use embedding::{EmbeddingSet, FingerprintEmbedding};
pub use error::{Error, Result};
pub use minutia_map::{AttentionMask, MapParams, MinutiaMap};
pub use preprocess::SpectrumPatch;
pub use synth::SynthSpec;
