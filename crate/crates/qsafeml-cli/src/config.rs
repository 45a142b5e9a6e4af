//! Optional TOML configuration overlay. Each section mirrors one
//! subcommand's flags; precedence is flags > file > built-in defaults.
//! Unknown keys are rejected.

use anyhow::Context;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub synth: Option<SynthSection>,
    pub train: Option<TrainSection>,
    pub predict: Option<PredictSection>,
    pub monitor: Option<MonitorSection>,
    pub online: Option<OnlineSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_samples: Option<usize>,
    pub n_features: Option<usize>,
    pub n_classes: Option<usize>,
    pub separation: Option<f64>,
    pub seed: Option<u64>,
    pub noise_rate: Option<f64>,
    pub noise_seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub data: Option<PathBuf>,
    pub label_col: Option<String>,
    pub qubits: Option<usize>,
    pub layers: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub pca_k: Option<usize>,
    pub test_fraction: Option<f64>,
    pub grad_mode: Option<String>,
    pub binning: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub label_col: Option<String>,
    pub split: Option<String>,
    pub state_format: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSection {
    pub records: Option<Vec<PathBuf>>,
    pub n_classes: Option<usize>,
    pub thresholds: Option<String>,
    pub grouping: Option<String>,
    pub qre_smoothing: Option<f64>,
    pub out: Option<PathBuf>,
    pub plots_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSection {
    pub records_stream: Option<String>,
    pub reference: Option<PathBuf>,
    pub batch_size: Option<usize>,
    pub thresholds: Option<String>,
    pub qre_smoothing: Option<f64>,
}

pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("invalid config file {}", path.display()))
        }
    }
}
