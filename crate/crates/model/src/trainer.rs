//! Multi-task training loop and validation.
//!
//! Each step: per-sample seeded augmentation (image and minutiae together),
//! enhancement, resize to the input side, ground-truth map from the warped
//! minutiae, forward, per-branch cross-entropy plus the map loss, one
//! RMSProp step, then class-weight renormalization. Everything runs on one
//! thread in a fixed order, so equal seeds give equal runs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor, D};
use fpembed_core::augment::{augment_pipeline, AugmentConfig};
use fpembed_core::data_io::{load_record, ImageSource};
use fpembed_core::evaluate::{compute_eer, match_score};
use fpembed_core::minutia_map::build_minutia_map;
use fpembed_core::preprocess::{enhance, resize_minutiae, resize_square, EnhanceMethod};
use fpembed_core::{DatasetIndex, MinutiaSet};
use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{validate_augment, ModelConfig, TrainConfig};
use crate::error::{ModelError, Result};
use crate::losses::{cross_entropy_logits, minutia_map_loss_tensor, total_loss, ClassHead, LossBreakdown, ScaleUpdate};
use crate::model::EmbeddingModel;
use crate::network::{batch_embeddings, Mode};
use crate::optim::{RmsProp, RmsPropConfig};

/// One decoded training image with its label and ground-truth minutiae.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image_id: String,
    pub label: usize,
    pub finger_id: usize,
    pub pixels: Array2<f64>,
    pub minutiae: MinutiaSet,
}

/// Network-ready sample: `S×S` input and its `(C, S/2, S/2)` target map.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub input: Array2<f64>,
    pub map: Array3<f64>,
    pub label: usize,
}

/// Decodes every record. Externally enhanced images are enhanced here, since
/// the enhanced sibling only matches the unaugmented image.
pub fn load_samples(index: &DatasetIndex, enhance_method: &EnhanceMethod) -> Result<Vec<Sample>> {
    index
        .records()
        .iter()
        .map(|r| {
            let (mut image, minutiae) = load_record(r)?;
            let minutiae = minutiae.ok_or_else(|| {
                ModelError::Data(format!("no ground-truth minutiae for `{}`", r.image_id))
            })?;
            if *enhance_method == EnhanceMethod::External {
                let src = match &r.source {
                    ImageSource::File(p) => Some(p.as_path()),
                    ImageSource::Synthetic { .. } => None,
                };
                image = enhance(&image, enhance_method, src)?;
            }
            Ok(Sample {
                image_id: r.image_id.clone(),
                label: r.finger_id,
                finger_id: r.finger_id,
                pixels: image.into_pixels(),
                minutiae,
            })
        })
        .collect()
}

/// Augmentation seed stream for `(epoch, position)`; independent of batch order.
pub fn sample_rng(seed: u64, epoch: usize, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | sample as u64);
    rng
}

/// Augment (optional) → enhance → resize → target map.
pub fn prepare_sample(
    sample: &Sample,
    model: &ModelConfig,
    enhance_method: &EnhanceMethod,
    augment: Option<(&AugmentConfig, &mut ChaCha8Rng)>,
) -> Result<Prepared> {
    let (pixels, minutiae) = match augment {
        Some((cfg, rng)) => {
            let (p, m, _) = augment_pipeline(&sample.pixels, &sample.minutiae, cfg, rng)?;
            (p, m)
        }
        None => (sample.pixels.clone(), sample.minutiae.clone()),
    };
    let pixels = match enhance_method {
        EnhanceMethod::LocalNormalize { block } => fpembed_core::preprocess::local_normalize(&pixels, *block),
        EnhanceMethod::None | EnhanceMethod::External => pixels,
    };
    let (h, w) = pixels.dim();
    let side = model.input_side;
    let input = resize_square(&pixels, side);
    let minutiae = resize_minutiae(&minutiae, h, w, side);
    let map = build_minutia_map(&minutiae, side, &model.map_params())?;
    Ok(Prepared {
        input,
        map: map.values,
        label: sample.label,
    })
}

/// Stacks inputs into `(B, 1, S, S)` and maps into `(B, C, S/2, S/2)`.
pub fn batch_tensors(batch: &[Prepared], dtype: DType, dev: &Device) -> Result<(Tensor, Tensor, Vec<usize>)> {
    let s = batch[0].input.dim().0;
    let (c, m, _) = batch[0].map.dim();
    let inputs: Vec<f64> = batch.iter().flat_map(|p| p.input.iter().copied()).collect();
    let maps: Vec<f64> = batch.iter().flat_map(|p| p.map.iter().copied()).collect();
    let n = batch.len();
    let x = Tensor::from_vec(inputs, (n, 1, s, s), dev)?.to_dtype(dtype)?;
    let hg = Tensor::from_vec(maps, (n, c, m, m), dev)?.to_dtype(dtype)?;
    Ok((x, hg, batch.iter().map(|p| p.label).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    #[serde(flatten)]
    pub losses: LossBreakdown,
    pub scale_updates: Vec<(String, ScaleUpdate)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationMetrics {
    pub accuracy_texture: f64,
    pub accuracy_minutia: f64,
    pub accuracy_frequency: Option<f64>,
    pub l_map: f64,
    pub l_all: f64,
    pub eer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub steps: usize,
    /// Means over the epoch's steps.
    pub train: LossBreakdown,
    pub validation: Option<ValidationMetrics>,
}

fn csv_header() -> &'static str {
    "epoch,steps,l_t,l_m,l_f,l_map,l_all,val_acc_texture,val_acc_minutia,val_acc_frequency,val_l_map,val_l_all,val_eer"
}

fn csv_row(m: &EpochMetrics) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let v = m.validation.as_ref();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        m.epoch,
        m.steps,
        m.train.l_t,
        m.train.l_m,
        m.train.l_f,
        m.train.l_map,
        m.train.l_all,
        opt(v.map(|v| v.accuracy_texture)),
        opt(v.map(|v| v.accuracy_minutia)),
        opt(v.and_then(|v| v.accuracy_frequency)),
        opt(v.map(|v| v.l_map)),
        opt(v.map(|v| v.l_all)),
        opt(v.and_then(|v| v.eer)),
    )
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

pub fn optimizer_config(cfg: &TrainConfig) -> RmsPropConfig {
    RmsPropConfig {
        lr_features: cfg.lr_features,
        lr_stn: cfg.lr_stn,
        alpha: cfg.rmsprop_alpha,
        eps: cfg.rmsprop_eps,
        weight_decay: cfg.weight_decay,
    }
}

/// Training state: model, optimizer and logs.
pub struct Trainer {
    pub model: EmbeddingModel,
    pub optim: RmsProp,
    pub config: TrainConfig,
    pub augment: AugmentConfig,
    pub log: Vec<StepRecord>,
    pub history: Vec<EpochMetrics>,
    pub epoch: usize,
    step: u64,
    log_file: Option<BufWriter<File>>,
}

impl Trainer {
    pub fn new(model_cfg: &ModelConfig, config: &TrainConfig, augment: &AugmentConfig, dtype: DType) -> Result<Self> {
        model_cfg.validate()?;
        config.validate()?;
        validate_augment(augment)?;
        let mut model = EmbeddingModel::new(model_cfg, config.use_adacos, config.seed, dtype, &Device::Cpu)?;
        if let Some(s) = config.adacos_fixed_scale {
            for (_, head) in model.heads.iter_mut() {
                if let ClassHead::AdaCos(a) = head {
                    a.scale = s;
                    a.frozen = true;
                }
            }
        }
        Self::with_model(model, RmsProp::new(optimizer_config(config)), config, augment, 0, Vec::new())
    }

    /// Resumes from a checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let model = ckpt.build_model(&Device::Cpu)?;
        let optim = ckpt.build_optimizer(optimizer_config(&ckpt.train_config));
        let mut t = Self::with_model(model, optim, &ckpt.train_config, &ckpt.augment_config, ckpt.epoch, ckpt.history.clone())?;
        t.step = t.optim.step_count;
        Ok(t)
    }

    fn with_model(
        model: EmbeddingModel,
        optim: RmsProp,
        config: &TrainConfig,
        augment: &AugmentConfig,
        epoch: usize,
        history: Vec<EpochMetrics>,
    ) -> Result<Self> {
        let log_file = match &config.checkpoint_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let f = fs::OpenOptions::new().create(true).append(true).open(dir.join("train_log.jsonl"))?;
                Some(BufWriter::new(f))
            }
            None => None,
        };
        Ok(Self {
            model,
            optim,
            config: config.clone(),
            augment: augment.clone(),
            log: Vec::new(),
            history,
            epoch,
            step: 0,
            log_file,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Forward, losses and one optimizer step on a prepared batch.
    pub fn train_step(&mut self, batch: &[Prepared]) -> Result<StepRecord> {
        let net = &self.model.net;
        let (x, hg, labels) = batch_tensors(batch, net.dtype(), net.device())?;
        let (all, losses, updates) = batch_losses(&mut self.model, &x, &hg, &labels, &self.config)?;
        if !losses.l_all.is_finite() {
            return Err(ModelError::Divergence { step: self.step as usize, loss: losses.l_all });
        }
        let grads = all.backward()?;
        self.optim.step(self.model.net.params(), &grads)?;
        for (_, head) in self.model.heads.iter() {
            head.after_step(self.model.net.params())?;
        }
        let record = StepRecord {
            epoch: self.epoch,
            step: self.step,
            losses,
            scale_updates: updates,
        };
        self.step += 1;
        if let Some(f) = &mut self.log_file {
            serde_json::to_writer(&mut *f, &record)?;
            writeln!(f)?;
        }
        log::debug!("step {} L_all {:.6}", record.step, record.losses.l_all);
        self.log.push(record.clone());
        Ok(record)
    }

    /// One pass over `samples` in a seeded shuffled order. A trailing batch
    /// of one sample is dropped.
    pub fn run_epoch(&mut self, samples: &[Sample]) -> Result<EpochMetrics> {
        let cfg = self.config.clone();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut sample_rng(cfg.seed ^ 0x5bd1_e995, self.epoch, 0));
        let mut sums = LossBreakdown { lambda_map: cfg.lambda_map, ..Default::default() };
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch = chunk
                .iter()
                .map(|&i| {
                    let mut rng = sample_rng(cfg.seed, self.epoch, i);
                    let aug = cfg.use_augment.then_some((&self.augment, &mut rng));
                    prepare_sample(&samples[i], self.model.config(), &cfg.enhance, aug)
                })
                .collect::<Result<Vec<_>>>()?;
            let r = self.train_step(&batch)?.losses;
            sums.l_t += r.l_t;
            sums.l_m += r.l_m;
            sums.l_f += r.l_f;
            sums.l_map += r.l_map;
            sums.l_all += r.l_all;
            steps += 1;
        }
        let n = steps.max(1) as f64;
        let train = LossBreakdown {
            l_t: sums.l_t / n,
            l_m: sums.l_m / n,
            l_f: sums.l_f / n,
            l_map: sums.l_map / n,
            l_all: sums.l_all / n,
            lambda_map: cfg.lambda_map,
        };
        self.epoch += 1;
        if let Some(f) = &mut self.log_file {
            f.flush()?;
        }
        Ok(EpochMetrics {
            epoch: self.epoch,
            steps,
            train,
            validation: None,
        })
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        Checkpoint::capture(&self.model, Some(&self.optim), &self.config, &self.augment, self.epoch, self.history.clone())
    }

    /// Runs the configured number of epochs with per-epoch validation.
    /// Returns the checkpoint with the lowest validation `L_all`, or the
    /// final one without validation data.
    pub fn fit(&mut self, train: &[Sample], val: &[Sample]) -> Result<Checkpoint> {
        if train.len() < 2 {
            return Err(ModelError::Data(format!("need at least two training images, got {}", train.len())));
        }
        let dir = self.config.checkpoint_dir.clone();
        let mut best: Option<(f64, Checkpoint)> = None;
        while self.epoch < self.config.epochs {
            let mut metrics = self.run_epoch(train)?;
            if !val.is_empty() {
                metrics.validation = Some(validate(&self.model, &self.config, val)?);
            }
            log::info!(
                "epoch {} L_all {:.4} (L_t {:.4} L_m {:.4} L_f {:.4} L_map {:.5})",
                metrics.epoch,
                metrics.train.l_all,
                metrics.train.l_t,
                metrics.train.l_m,
                metrics.train.l_f,
                metrics.train.l_map
            );
            self.history.push(metrics.clone());
            if let Some(d) = &dir {
                write_metrics_csv(&d.join("metrics.csv"), &self.history)?;
            }
            if let Some(v) = &metrics.validation {
                if best.as_ref().is_none_or(|(l, _)| v.l_all < *l) {
                    let ckpt = self.checkpoint()?;
                    if let Some(d) = &dir {
                        ckpt.save(&d.join("best.safetensors"))?;
                    }
                    best = Some((v.l_all, ckpt));
                }
            }
        }
        let last = self.checkpoint()?;
        if let Some(d) = &dir {
            last.save(&d.join("last.safetensors"))?;
        }
        Ok(match best {
            Some((_, mut b)) => {
                b.history = self.history.clone();
                b
            }
            None => last,
        })
    }
}

/// Train-mode forward and `L_all` as a differentiable scalar, with its
/// parts. AdaCos heads that are not frozen re-estimate their scale here.
pub fn batch_losses(
    model: &mut EmbeddingModel,
    x: &Tensor,
    hg: &Tensor,
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(Tensor, LossBreakdown, Vec<(String, ScaleUpdate)>)> {
    let out = model.net.forward(x, Mode::Train, Some(hg))?;
    let mut updates = Vec::new();
    let mut ce = |head: &mut ClassHead, name: &str, features: &Tensor| -> Result<Tensor> {
        let (logits, upd) = head.logits(features, labels, Mode::Train)?;
        if let Some(u) = upd {
            updates.push((name.to_string(), u));
        }
        cross_entropy_logits(&logits, labels)
    };
    let l_t = ce(&mut model.heads.texture, "texture", &out.t_tex)?;
    let l_m = ce(&mut model.heads.minutia, "minutia", &out.t_min)?;
    let l_f = match (&mut model.heads.frequency, &out.t_freq) {
        (Some(h), Some(f)) => Some(ce(h, "frequency", f)?),
        _ => None,
    };
    let l_map = minutia_map_loss_tensor(hg, &out.h_e, config.rho)?;
    let mut all = ((&l_t + &l_m)? + (&l_map * config.lambda_map)?)?;
    if let Some(f) = &l_f {
        all = (all + f)?;
    }
    let parts = [
        scalar(&l_t)?,
        scalar(&l_m)?,
        l_f.as_ref().map(scalar).transpose()?.unwrap_or(0.0),
        scalar(&l_map)?,
    ];
    let losses = if parts.iter().all(|v| v.is_finite()) {
        total_loss(parts[0], parts[1], parts[2], parts[3], config.lambda_map)?
    } else {
        LossBreakdown {
            l_t: parts[0],
            l_m: parts[1],
            l_f: parts[2],
            l_map: parts[3],
            l_all: f64::NAN,
            lambda_map: config.lambda_map,
        }
    };
    Ok((all, losses, updates))
}

pub fn write_metrics_csv(path: &Path, history: &[EpochMetrics]) -> Result<()> {
    let mut text = String::from(csv_header());
    text.push('\n');
    for m in history {
        text.push_str(&csv_row(m));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Trains from dataset indices that share a label space.
pub fn train(
    model_cfg: &ModelConfig,
    config: &TrainConfig,
    augment: &AugmentConfig,
    train_index: &DatasetIndex,
    val_index: &DatasetIndex,
) -> Result<Checkpoint> {
    if train_index.is_empty() {
        return Err(ModelError::Data("training index is empty".into()));
    }
    if !val_index.is_empty() && val_index.class_count() != train_index.class_count() {
        return Err(ModelError::Data(format!(
            "label spaces differ: train {} classes, validation {}",
            train_index.class_count(),
            val_index.class_count()
        )));
    }
    if train_index.class_count() != model_cfg.class_count {
        return Err(ModelError::config(
            "model.class_count",
            format!("{} but the dataset has {} fingers", model_cfg.class_count, train_index.class_count()),
        ));
    }
    let mut trainer = Trainer::new(model_cfg, config, augment, DType::F32)?;
    let train = load_samples(train_index, &config.enhance)?;
    let val = load_samples(val_index, &config.enhance)?;
    trainer.fit(&train, &val)
}

fn argmax_rows(t: &Tensor) -> Result<Vec<usize>> {
    Ok(t.argmax(D::Minus1)?.to_vec1::<u32>()?.into_iter().map(|v| v as usize).collect())
}

/// Validation metrics on unaugmented samples. The model is not modified.
pub fn validate(model: &EmbeddingModel, config: &TrainConfig, samples: &[Sample]) -> Result<ValidationMetrics> {
    let classes = model.config().class_count;
    if let Some(s) = samples.iter().find(|s| s.label >= classes) {
        return Err(ModelError::Contract(format!(
            "label {} of `{}` outside the trained range [0, {classes})",
            s.label, s.image_id
        )));
    }
    if samples.is_empty() {
        return Err(ModelError::Data("validation set is empty".into()));
    }
    let mut heads = model.heads.clone();
    let net = &model.net;
    let (mut hit_t, mut hit_m, mut hit_f) = (0usize, 0usize, 0usize);
    let (mut sum_ce, mut sum_map) = (0.0, 0.0);
    let mut embeddings = Vec::new();
    for chunk in samples.chunks(config.batch_size.max(1)) {
        let batch = chunk
            .iter()
            .map(|s| prepare_sample(s, model.config(), &config.enhance, None))
            .collect::<Result<Vec<_>>>()?;
        let (x, hg, labels) = batch_tensors(&batch, net.dtype(), net.device())?;
        let out = net.forward(&x, Mode::Infer, None)?;
        let n = chunk.len() as f64;
        let eval_head = |head: &mut ClassHead, f: &Tensor, hits: &mut usize| -> Result<f64> {
            let (logits, _) = head.logits(f, &labels, Mode::Infer)?;
            *hits += argmax_rows(&logits)?.iter().zip(&labels).filter(|(p, y)| p == y).count();
            scalar(&cross_entropy_logits(&logits, &labels)?)
        };
        sum_ce += n * eval_head(&mut heads.texture, &out.t_tex, &mut hit_t)?;
        sum_ce += n * eval_head(&mut heads.minutia, &out.t_min, &mut hit_m)?;
        if let (Some(h), Some(f)) = (&mut heads.frequency, &out.t_freq) {
            sum_ce += n * eval_head(h, f, &mut hit_f)?;
        }
        sum_map += n * scalar(&minutia_map_loss_tensor(&hg, &out.h_e, config.rho)?)?;
        if config.validation_eer {
            embeddings.extend(batch_embeddings(&out)?);
        }
    }
    let total = samples.len() as f64;
    let l_map = sum_map / total;
    let eer = if config.validation_eer {
        let labels: Vec<usize> = samples.iter().map(|s| s.finger_id).collect();
        Some(pairwise_eer(&embeddings, &labels)?)
    } else {
        None
    };
    Ok(ValidationMetrics {
        accuracy_texture: hit_t as f64 / total,
        accuracy_minutia: hit_m as f64 / total,
        accuracy_frequency: heads.frequency.as_ref().map(|_| hit_f as f64 / total),
        l_map,
        l_all: sum_ce / total + config.lambda_map * l_map,
        eer,
    })
}

/// All-pairs EER over embeddings labelled by finger.
pub fn pairwise_eer(embeddings: &[fpembed_core::FingerprintEmbedding], fingers: &[usize]) -> Result<f64> {
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            let s = match_score(&embeddings[i], &embeddings[j])?;
            if fingers[i] == fingers[j] {
                genuine.push(s);
            } else {
                impostor.push(s);
            }
        }
    }
    Ok(compute_eer(&genuine, &impostor)?.eer)
}

/// Default location of the per-step log inside a checkpoint directory.
pub fn log_path(dir: &Path) -> PathBuf {
    dir.join("train_log.jsonl")
}

#[cfg(test)]
mod tests {
    use super::*;
    use fpembed_core::data_io::synthetic_index;
    use fpembed_core::SynthSpec;

    fn tiny() -> (ModelConfig, TrainConfig, Vec<Sample>) {
        let mut m = ModelConfig::smoke(3);
        m.input_side = 64;
        let t = TrainConfig { batch_size: 3, epochs: 2, use_augment: false, ..TrainConfig::default() };
        let spec = SynthSpec { width: 96, height: 96, minutia_count: 6, ..SynthSpec::default() };
        let idx = synthetic_index(3, 0..2, &spec, 4).unwrap();
        (m, t, load_samples(&idx, &t_enhance()).unwrap())
    }

    fn t_enhance() -> EnhanceMethod {
        EnhanceMethod::default()
    }

    #[test]
    fn prepared_sample_shapes() {
        let (m, _, s) = tiny();
        let p = prepare_sample(&s[0], &m, &t_enhance(), None).unwrap();
        assert_eq!(p.input.dim(), (64, 64));
        assert_eq!(p.map.dim(), (6, 32, 32));
        assert!(p.map.iter().any(|&v| v > 0.5));
    }

    #[test]
    fn validation_is_pure_and_label_checked() {
        let (m, t, s) = tiny();
        let trainer = Trainer::new(&m, &t, &AugmentConfig::default(), DType::F32).unwrap();
        let a = validate(&trainer.model, &t, &s).unwrap();
        let b = validate(&trainer.model, &t, &s).unwrap();
        assert_eq!(a, b);
        let mut bad = s.clone();
        bad[0].label = 3;
        assert!(matches!(validate(&trainer.model, &t, &bad), Err(ModelError::Contract(_))));
    }

    #[test]
    fn epoch_drops_singleton_batch_and_keeps_unit_rows() {
        let (m, mut t, s) = tiny();
        t.batch_size = 5;
        let mut trainer = Trainer::new(&m, &t, &AugmentConfig::default(), DType::F32).unwrap();
        let e = trainer.run_epoch(&s[..6]).unwrap();
        assert_eq!(e.steps, 1);
        for (_, h) in trainer.model.heads.iter() {
            if let ClassHead::AdaCos(a) = h {
                assert!(a.max_row_norm_error().unwrap() < 1e-5);
                assert_eq!(a.update_count, 1);
            }
        }
    }

    #[test]
    fn file_record_without_minutiae_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("1_1.png");
        fpembed_core::raster::save_gray(&p, &Array2::from_elem((32, 32), 0.5)).unwrap();
        let rec = fpembed_core::Record {
            image_id: "1_1".into(),
            source: ImageSource::File(p),
            finger_id: 0,
            impression_id: 1,
            group: "db".into(),
            minutiae: None,
        };
        let idx = DatasetIndex::from_records(vec![rec], 1).unwrap();
        let r = load_samples(&idx, &EnhanceMethod::None);
        assert!(matches!(r, Err(ModelError::Data(_))), "{r:?}");
    }
}
