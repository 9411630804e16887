use std::fs;
use std::path::Path;

use candle_core::Device;
use fpembed_core::augment::{
    apply_deformation, make_deformation_field, random_contrast, random_morphology, random_noise, AugmentConfig,
};
use fpembed_core::data_io::{load_dataset, split_train_val, synthetic_index, write_minutiae_file};
use fpembed_core::evaluate::{evaluate_dataset, match_score, Protocol};
use fpembed_core::raster::{load_gray, save_gray};
use fpembed_core::synth::{finger_seed, impression_seed, synthesize_impression};
use fpembed_core::{EmbeddingSet, Layout, MinutiaSet, SynthSpec};
use fpembed_model::checkpoint::Checkpoint;
use fpembed_model::extract::extract_embeddings;
use fpembed_model::trainer;
use fpembed_model::Ablation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{self, parse_overrides};
use crate::error::CliError;

fn writable_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

pub fn train(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    ablation: Option<Ablation>,
    raw: &[String],
) -> Result<(), CliError> {
    let overrides = parse_overrides(raw)?;
    let mut cfg = config::load(config_path, ablation, &overrides, seed)?;
    let index = match &cfg.data.root {
        Some(root) => load_dataset(root, cfg.data.layout)?,
        None => {
            let s = &cfg.data.synthetic;
            synthetic_index(s.fingers, 0..s.impressions, &s.spec, cfg.data.seed)?
        }
    };
    if cfg.model.class_count != index.class_count() {
        log::info!("model.class_count set to the dataset's {} fingers", index.class_count());
        cfg.model.class_count = index.class_count();
    }
    let (train_index, val_index) = split_train_val(&index, cfg.data.val_impressions)?;
    writable_dir(out)?;
    cfg.train.checkpoint_dir = Some(out.to_path_buf());
    fs::write(out.join("config.toml"), toml::to_string(&cfg).map_err(|e| CliError::Internal(e.to_string()))?)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let ckpt = trainer::train(&cfg.model, &cfg.train, &cfg.augment, &train_index, &val_index)?;
    let path = out.join("model.safetensors");
    ckpt.save(&path)?;
    println!("checkpoint {}", path.display());
    Ok(())
}

pub fn extract(checkpoint: &Path, data: &Path, layout: Layout, out: &Path, batch_size: usize) -> Result<(), CliError> {
    if batch_size == 0 {
        return Err(CliError::Config("--batch-size must be positive".into()));
    }
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.build_model(&Device::Cpu)?;
    let index = load_dataset(data, layout)?;
    let (set, failures) = extract_embeddings(&model, &index, &ckpt.train_config.enhance, batch_size)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        writable_dir(parent)?;
    }
    set.write(out)?;
    println!("{} embeddings of dimension {} written to {}", set.len(), set.dim(), out.display());
    if failures.is_empty() {
        Ok(())
    } else {
        let ids: Vec<&str> = failures.iter().map(|f| f.image_id.as_str()).collect();
        Err(CliError::Partial(format!("{} images skipped: {}", failures.len(), ids.join(", "))))
    }
}

pub fn match_ids(embeddings: &Path, a: &str, b: &str) -> Result<(), CliError> {
    let set = EmbeddingSet::read(embeddings)?;
    let get = |id: &str| set.get(id).ok_or_else(|| CliError::Config(format!("unknown id `{id}`")));
    let score = match_score(get(a)?, get(b)?)?;
    println!("{score:.6}");
    Ok(())
}

pub fn eval(embeddings: &Path, data: &Path, layout: Layout, protocol: Protocol, out: &Path) -> Result<(), CliError> {
    let set = EmbeddingSet::read(embeddings)?;
    let index = load_dataset(data, layout)?;
    let lookup = set.lookup();
    let missing: Vec<&str> = index
        .records()
        .iter()
        .map(|r| r.image_id.as_str())
        .filter(|id| !lookup.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Partial(format!("no embedding for: {}", missing.join(", "))));
    }
    let report = evaluate_dataset(&index, &set, protocol)?;
    report.write(out, protocol).map_err(CliError::from)?;
    println!("genuine pairs {}", report.genuine_count);
    println!("impostor pairs {}", report.impostor_count);
    println!("EER {:.2}%", report.eer * 100.0);
    Ok(())
}

pub fn synth(count: usize, impressions: usize, width: usize, height: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if impressions == 0 {
        return Err(CliError::Config("--impressions must be positive".into()));
    }
    let spec = SynthSpec { width, height, ..SynthSpec::default() };
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    writable_dir(out)?;
    for k in 0..count {
        let (finger, imp) = (k / impressions, k % impressions);
        let (pixels, mut mins) =
            synthesize_impression(finger_seed(seed, finger), impression_seed(seed, finger, imp), &spec)?;
        let stem = format!("{}_{}", finger + 1, imp + 1);
        mins.image_ref = stem.clone();
        save_gray(&out.join(format!("{stem}.png")), &pixels)?;
        write_minutiae_file(&out.join(format!("{stem}.min")), &mins)?;
    }
    println!("{count} images written to {}", out.display());
    Ok(())
}

/// Panels: (a) original, (b) contrast, (c) noise, (d) morphology,
/// (e) deformation. Each stage is applied alone to the original.
pub fn augment_preview(image: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let original = load_gray(image)?;
    let cfg = AugmentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let contrast = random_contrast(&original, &cfg, &mut rng);
    let noise = random_noise(&original, &cfg, &mut rng);
    let (morph, _) = random_morphology(&original, &cfg, &mut rng);
    let field = make_deformation_field(original.dim(), &cfg.deform, &mut rng)?;
    let (deformed, _) = apply_deformation(&original, &MinutiaSet::default(), &field)?;
    writable_dir(out)?;
    let panels = [
        ("a_original", &original),
        ("b_contrast", &contrast),
        ("c_noise", &noise),
        ("d_morphology", &morph),
        ("e_deformation", &deformed),
    ];
    for (name, img) in panels {
        save_gray(&out.join(format!("{name}.png")), img)?;
    }
    println!("5 panels written to {}", out.display());
    Ok(())
}
