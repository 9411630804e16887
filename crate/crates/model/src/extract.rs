//! Batched inference over a dataset index.

use candle_core::Tensor;
use fpembed_core::data_io::{load_record, ImageSource};
use fpembed_core::preprocess::{enhance, resize_square, EnhanceMethod};
use fpembed_core::{DatasetIndex, EmbeddingSet};

use crate::error::Result;
use crate::model::EmbeddingModel;

/// An image that could not be embedded.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractFailure {
    pub image_id: String,
    pub message: String,
}

/// Embeds every record of `index` in index order. Unreadable images are
/// skipped with a warning and reported; the set holds the rest.
pub fn extract_embeddings(
    model: &EmbeddingModel,
    index: &DatasetIndex,
    enhance_method: &EnhanceMethod,
    batch_size: usize,
) -> Result<(EmbeddingSet, Vec<ExtractFailure>)> {
    let side = model.config().input_side;
    let mut set = EmbeddingSet::default();
    let mut failures = Vec::new();
    let mut pending: Vec<(String, Vec<f64>)> = Vec::new();
    let flush = |pending: &mut Vec<(String, Vec<f64>)>, set: &mut EmbeddingSet| -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let n = pending.len();
        let data: Vec<f64> = pending.iter().flat_map(|(_, p)| p.iter().copied()).collect();
        let x = Tensor::from_vec(data, (n, 1, side, side), model.net.device())?.to_dtype(model.net.dtype())?;
        for ((id, _), e) in pending.drain(..).zip(model.embed(&x)?) {
            set.push(id, e);
        }
        Ok(())
    };
    for record in index.records() {
        let loaded = load_record(record).map_err(|e| e.to_string()).and_then(|(img, _)| {
            let src = match &record.source {
                ImageSource::File(p) => Some(p.as_path()),
                ImageSource::Synthetic { .. } => None,
            };
            enhance(&img, enhance_method, src).map_err(|e| e.to_string())
        });
        match loaded {
            Ok(img) => {
                let pixels = resize_square(img.pixels(), side);
                pending.push((record.image_id.clone(), pixels.into_raw_vec_and_offset().0));
                if pending.len() >= batch_size.max(1) {
                    flush(&mut pending, &mut set)?;
                }
            }
            Err(message) => {
                log::warn!("skipping `{}`: {message}", record.image_id);
                failures.push(ExtractFailure {
                    image_id: record.image_id.clone(),
                    message,
                });
            }
        }
    }
    flush(&mut pending, &mut set)?;
    Ok((set, failures))
}
