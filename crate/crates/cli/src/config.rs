//! Merged configuration file with dotted-path overrides.

use std::path::{Path, PathBuf};

use fpembed_core::augment::AugmentConfig;
use fpembed_core::evaluate::Protocol;
use fpembed_core::{Layout, SynthSpec};
use fpembed_model::config::validate_augment;
use fpembed_model::{Ablation, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

/// Synthetic dataset used when `data.root` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticData {
    pub fingers: usize,
    pub impressions: usize,
    pub spec: SynthSpec,
}

impl Default for SyntheticData {
    fn default() -> Self {
        Self {
            fingers: 10,
            impressions: 8,
            spec: SynthSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub root: Option<PathBuf>,
    pub layout: Layout,
    /// Impressions per finger held out for validation.
    pub val_impressions: usize,
    pub seed: u64,
    pub synthetic: SyntheticData,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            root: None,
            layout: Layout::Fvc,
            val_impressions: 2,
            seed: 0,
            synthetic: SyntheticData::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::AllPairs,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

/// Parses `--a.b value` pairs from trailing arguments.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .filter(|k| k.contains('.'))
            .ok_or_else(|| CliError::Config(format!("expected a `--section.key value` override, got `{flag}`")))?;
        let value = it
            .next()
            .ok_or_else(|| CliError::Config(format!("override `{flag}` has no value")))?;
        out.push((key.to_string(), value.clone()));
    }
    Ok(out)
}

/// TOML literal when it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|l| !l.is_empty()).ok_or_else(|| CliError::Config(format!("bad key `{key}`")))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn first_field(msg: &str) -> String {
    msg.lines().next().unwrap_or(msg).to_string()
}

/// Loads, overrides and validates. An ablation preset is applied before the
/// overrides; `seed` sets every seed in the config.
pub fn load(
    path: Option<&Path>,
    ablation: Option<Ablation>,
    overrides: &[(String, String)],
    seed: Option<u64>,
) -> Result<CliConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str::<Table>(&text).map_err(|e| CliError::Config(format!("{}: {}", p.display(), first_field(&e.to_string()))))?
        }
        None => Table::new(),
    };
    if let Some(a) = ablation {
        let (mut m, mut t) = (ModelConfig::default(), TrainConfig::default());
        a.apply(&mut m, &mut t);
        set_dotted(&mut table, "model.use_frequency", Value::Boolean(m.use_frequency))?;
        set_dotted(&mut table, "model.use_mam", Value::Boolean(m.use_mam))?;
        set_dotted(&mut table, "train.use_adacos", Value::Boolean(t.use_adacos))?;
        set_dotted(&mut table, "train.use_augment", Value::Boolean(t.use_augment))?;
    }
    for (k, v) in overrides {
        set_dotted(&mut table, k, parse_value(v))?;
    }
    if let Some(s) = seed {
        let s = Value::Integer(s as i64);
        set_dotted(&mut table, "train.seed", s.clone())?;
        set_dotted(&mut table, "data.seed", s)?;
    }
    let cfg: CliConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(first_field(&e.to_string())))?;
    cfg.validate()?;
    Ok(cfg)
}

impl CliConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        self.train.validate()?;
        validate_augment(&self.augment)?;
        self.data
            .synthetic
            .spec
            .validate()
            .map_err(|e| CliError::Config(format!("data.synthetic.spec: {e}")))?;
        if self.eval.batch_size == 0 {
            return Err(CliError::Config("eval.batch_size: must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_typed_and_nested() {
        let o = parse_overrides(&["--train.lr_features".into(), "0.01".into(), "--data.layout".into(), "flat".into()]).unwrap();
        let cfg = load(None, None, &o, Some(7)).unwrap();
        assert_eq!(cfg.train.lr_features, 0.01);
        assert_eq!(cfg.data.layout, Layout::Flat);
        assert_eq!((cfg.train.seed, cfg.data.seed), (7, 7));
    }

    #[test]
    fn invalid_values_name_their_field() {
        let o = parse_overrides(&["--train.lr_features".into(), "-1".into()]).unwrap();
        match load(None, None, &o, None) {
            Err(CliError::Config(m)) => assert!(m.contains("train.lr_features"), "{m}"),
            other => panic!("{other:?}"),
        }
        let o = parse_overrides(&["--model.nonsense".into(), "1".into()]).unwrap();
        assert!(matches!(load(None, None, &o, None), Err(CliError::Config(_))));
        assert!(parse_overrides(&["--flat".into(), "1".into()]).is_err());
    }

    #[test]
    fn ablation_preset_yields_to_overrides() {
        let o = parse_overrides(&["--model.use_mam".into(), "false".into()]).unwrap();
        let cfg = load(None, Some(Ablation::D), &o, None).unwrap();
        assert!(cfg.train.use_adacos && cfg.train.use_augment && !cfg.model.use_mam);
        let cfg = load(None, Some(Ablation::A), &[], None).unwrap();
        assert!(!cfg.train.use_adacos && !cfg.train.use_augment && cfg.model.use_frequency);
    }
}
