//! Experiment configuration files and dotted-path overrides.

use anyhow::{bail, Context, Result};
use radiprior::inverse::{PhotoModel, TrainConfig};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct Globals {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AdOurs,
    AdOursNoPrior,
    AdDirect,
    AdPt,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldPreset {
    #[default]
    Desk,
    Full,
}

impl FieldPreset {
    pub fn config(self) -> radiprior::neuralfield::RadianceFieldConfig {
        match self {
            FieldPreset::Desk => radiprior::neuralfield::RadianceFieldConfig::desk(),
            FieldPreset::Full => radiprior::neuralfield::RadianceFieldConfig::full(),
        }
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub scene: PathBuf,
    pub dataset: PathBuf,
    pub method: Method,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub field: FieldPreset,
    /// Initial value for optimizable albedo fields (truth stays in the
    /// scene file; optimization starts from this guess).
    #[serde(default)]
    pub init_albedo: Option<f64>,
    #[serde(default)]
    pub init_roughness: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    /// Loads the config, applies --set overrides, then global flags.
    pub fn load(path: &Path, globals: &Globals) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {path:?}"))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).context("parsing config JSON")?;
        for setting in &globals.overrides {
            apply_override(&mut value, setting)?;
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| anyhow::Error::new(radiprior::Error::Config(e.to_string())))?;
        if let Some(seed) = globals.seed {
            cfg.seed = Some(seed);
        }
        if let Some(out) = &globals.out {
            cfg.out = Some(out.clone());
        }
        if let Some(threads) = globals.threads {
            cfg.train.threads = threads;
        }
        if let Some(seed) = cfg.seed {
            cfg.train.seed = seed;
        }
        Ok(cfg)
    }

    /// Method names resolve to an estimator/loss wiring.
    pub fn apply_method(&mut self) {
        match self.method {
            Method::AdOurs => {}
            Method::AdOursNoPrior => {
                self.train.weights.prior = 0.0;
            }
            Method::AdDirect => {
                self.train.photo_model = PhotoModel::Direct;
                self.train.weights.prior = 0.0;
                self.train.weights.lhs = 0.0;
            }
            Method::AdPt => {
                self.train.photo_model = PhotoModel::PathTraced {
                    max_depth: 15,
                    rr_prob: 0.95,
                    rr_start_depth: 3,
                };
                self.train.weights.prior = 0.0;
                self.train.weights.lhs = 0.0;
            }
        }
    }

    /// Resolved-config echo; rerunning it reproduces the run.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(self)?,
        )?;
        Ok(())
    }
}

/// Sets `a.b.c=value` inside a JSON document; the value is parsed as
/// JSON when possible, else taken as a string.
pub fn apply_override(doc: &mut serde_json::Value, setting: &str) -> Result<()> {
    let Some((path, raw)) = setting.split_once('=') else {
        bail!("--set expects KEY=VALUE, got '{setting}'");
    };
    let value = serde_json::from_str(raw).unwrap_or(serde_json::Value::String(raw.to_string()));
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                _ => bail!("cannot set '{path}': parent is not an object"),
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default())),
            _ => bail!("cannot traverse '{path}' at '{part}'"),
        };
    }
    Ok(())
}
