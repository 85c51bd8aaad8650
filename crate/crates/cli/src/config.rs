//! Run configuration files.
//!
//! A file names a preset and overrides individual fields:
//!
//! ```json
//! {
//!   "preset": "table3_pso_pso",
//!   "tier": { "max_lag": 2, "inner": { "termination": { "max_iterations": 200 } } },
//!   "data": { "source": "generator", "generator": "mimo_linear", "n_samples": 600 },
//!   "out_dir": "runs/mimo"
//! }
//! ```
//!
//! Overrides merge key by key into the preset. Replacing an optimiser with a
//! different algorithm replaces its whole parameter block.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use narx_core::benchmarks::{Excitation, Generator};
use narx_core::two_tier::{TierConfig, Variant};
use narx_core::{Dataset, Schema};

use crate::CliError;

pub const PRESETS: [(&str, Variant); 3] = [
    ("table1_abc", Variant::AbcAbc),
    ("table2_ais_pso", Variant::AisPso),
    ("table3_pso_pso", Variant::PsoPso),
];

pub fn preset(name: &str) -> Result<TierConfig, CliError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|&(_, v)| TierConfig::preset(v))
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            CliError::Usage(format!("unknown preset `{name}`; valid presets: {}", names.join(", ")))
        })
}

fn default_n() -> usize {
    1000
}

fn default_noise() -> f64 {
    0.01
}

fn default_period() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        inputs: Vec<String>,
        outputs: Vec<String>,
        #[serde(default = "default_period")]
        sample_period: f64,
    },
    Generator {
        generator: String,
        #[serde(default = "default_n")]
        n_samples: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default)]
        excitation: Excitation,
        /// Defaults to the run seed.
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl DataSource {
    pub fn generator(name: &str) -> Self {
        DataSource::Generator {
            generator: name.into(),
            n_samples: default_n(),
            noise: default_noise(),
            excitation: Excitation::default(),
            seed: None,
        }
    }

    /// Load or generate the dataset. Relative CSV paths resolve against `base`.
    pub fn load(&self, base: &Path, run_seed: u64) -> Result<Dataset, CliError> {
        match self {
            DataSource::Csv {
                path,
                inputs,
                outputs,
                sample_period,
            } => {
                let schema = Schema::new(inputs.clone(), outputs.clone())
                    .with_sample_period(*sample_period);
                Ok(narx_core::data::load_csv(base.join(path), &schema)?)
            }
            DataSource::Generator {
                generator,
                n_samples,
                noise,
                excitation,
                seed,
            } => {
                let g: Generator = generator.parse()?;
                Ok(g.generate(*n_samples, excitation, *noise, seed.unwrap_or(run_seed))?)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    /// Tolerance for the `max |y - y_hat| <= epsilon` check, physical units.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    tier: Option<Value>,
    #[serde(default)]
    data: Option<DataSource>,
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    report: ReportOptions,
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tier: TierConfig,
    pub data: Option<DataSource>,
    pub out_dir: Option<PathBuf>,
    pub report: ReportOptions,
    /// Directory relative data paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let switches_algorithm = matches!(
                (b.get("algorithm"), o.get("algorithm")),
                (Some(x), Some(y)) if x != y
            );
            if switches_algorithm {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self, CliError> {
        Ok(Self {
            tier: preset(name)?,
            data: None,
            out_dir: None,
            report: ReportOptions::default(),
            base_dir: PathBuf::from("."),
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let file: RunConfigFile =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let tier = match (file.preset, file.tier) {
            (Some(p), over) => {
                let mut v = serde_json::to_value(preset(&p)?).expect("config serialises");
                if let Some(o) = over {
                    merge(&mut v, o);
                }
                serde_json::from_value(v).map_err(|e| CliError::Config(format!("tier: {e}")))?
            }
            (None, Some(v)) => {
                serde_json::from_value(v).map_err(|e| CliError::Config(format!("tier: {e}")))?
            }
            (None, None) => {
                return Err(CliError::Config(
                    "configuration needs a `preset`, a `tier` block, or both".into(),
                ))
            }
        };
        let cfg = Self {
            tier,
            data: file.data,
            out_dir: file.out_dir,
            report: file.report,
            base_dir: base_dir.to_path_buf(),
        };
        cfg.tier.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}
