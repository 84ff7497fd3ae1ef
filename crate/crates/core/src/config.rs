//! Run configuration: one JSON document driving every command, with dotted
//! `--set key=value` overrides. All randomness flows from the explicit seeds
//! recorded here; no field is seeded from the clock.

use crate::data::BiasSpec;
use crate::error::{Error, Result};
use crate::ganstack::{BundleSpec, TargetTrainConfig, TrainConfig};
use crate::moea::NsgaConfig;
use crate::objectives::IntensityMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// Procedural disc dataset with optional planted bias.
    Blobs {
        seed: u64,
        n: usize,
        #[serde(default)]
        bias: Option<BiasSpec>,
        /// Append the erased-instance class after generation.
        #[serde(default)]
        erased_class_seed: Option<u64>,
    },
    /// External IDX image/label pair.
    Idx { images: String, labels: String },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Blobs {
            seed: 42,
            n: 2000,
            bias: None,
            erased_class_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fractions: [0.6, 0.2, 0.2],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// Seed for drawing the anchor from the holdout split when no explicit
    /// index is given.
    pub anchor_seed: u64,
    /// Targeted mode: drive the prediction toward this class.
    #[serde(default)]
    pub target_class: Option<usize>,
    #[serde(default = "default_intensity")]
    pub intensity: IntensityMode,
}

fn default_intensity() -> IntensityMode {
    IntensityMode::Norm
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            anchor_seed: 7,
            target_class: None,
            intensity: IntensityMode::Norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    /// Attribute-index combinations for the bias table; the empty
    /// combination reports per-class totals.
    pub bias_combinations: Vec<Vec<usize>>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            bias_combinations: vec![vec![], vec![0], vec![1], vec![2], vec![3], vec![4]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model: BundleSpec,
    pub train: TrainConfig,
    pub target: TargetTrainConfig,
    pub split: SplitConfig,
    pub nsga: NsgaConfig,
    pub audit: AuditConfig,
    pub report: ReportConfig,
    pub output_dir: String,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train
            .weights
            .validate()
            .map_err(|e| Error::Config(format!("train.weights: {e}")))?;
        self.nsga
            .validate()
            .map_err(|e| Error::Config(format!("nsga: {e}")))?;
        let sum: f64 = self.split.fractions.iter().sum();
        if self.split.fractions.iter().any(|&f| f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split.fractions {:?} must be positive and sum to 1",
                self.split.fractions
            )));
        }
        if let DatasetConfig::Blobs { n, bias, .. } = &self.dataset {
            if *n < 50 {
                return Err(Error::Config(format!("dataset.n = {n} is below 50")));
            }
            if let Some(b) = bias {
                if !(0.0..=1.0).contains(&b.strength) {
                    return Err(Error::Config(format!(
                        "dataset.bias.strength = {} outside [0, 1]",
                        b.strength
                    )));
                }
            }
        }
        Ok(())
    }

    /// Load a config file and apply dotted-path overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut value: Value = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(RunConfig::default()).expect("default config"),
        };
        for raw in overrides {
            let (key, val) = raw
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{raw}' is not key=value")))?;
            apply_override(&mut value, key, val)?;
        }
        let config: RunConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }
}

/// Set a dotted-path key inside a JSON document. The value is parsed as JSON
/// when possible and falls back to a plain string.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<()> {
    let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(Error::Config(format!("override path '{path}' has an empty segment")));
        }
        let last = i == segments.len() - 1;
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}' crosses a non-object")))?;
        if last {
            obj.insert(seg.to_string(), parsed);
            return Ok(());
        }
        cursor = obj
            .entry(seg.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
