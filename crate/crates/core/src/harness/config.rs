//! Experiment configuration files and the shipped presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{parse_toml, read_text, DatasetSpec, Problem};
use crate::error::{Error, Result};
use crate::model::CtfnoConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
}

/// One experiment: which data, which model, how to train it, where results go.
///
/// Relative paths are resolved against the working directory. `data` describes
/// how `generate` builds the dataset; without it the problem defaults apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub dataset: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub report_format: ReportFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DatasetSpec>,
    pub model: CtfnoConfig,
    pub train: TrainConfig,
}

pub const PRESETS: [(&str, &str); 7] = [
    ("heat-desk", include_str!("../../presets/heat-desk.toml")),
    ("burgers-desk", include_str!("../../presets/burgers-desk.toml")),
    ("reaction-desk", include_str!("../../presets/reaction-desk.toml")),
    ("low-synthetic", include_str!("../../presets/low-synthetic.toml")),
    ("heat-paper", include_str!("../../presets/heat-paper.toml")),
    ("burgers-paper", include_str!("../../presets/burgers-paper.toml")),
    ("reaction-paper", include_str!("../../presets/reaction-paper.toml")),
];

impl ExperimentConfig {
    pub fn parse(origin: &Path, text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(origin, text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a name from [`PRESETS`] is accepted when no such file exists.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            if let Some(cfg) = path.to_str().and_then(Self::preset) {
                return cfg;
            }
        }
        Self::parse(path, &read_text(path)?)
    }

    pub fn preset(name: &str) -> Option<Result<Self>> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, text)| Self::parse(Path::new(&format!("preset {n}")), text))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if let Some(d) = &self.data {
            if d.problem != self.problem {
                return Err(Error::config(format!("data section is for {}, experiment is {}", d.problem, self.problem)));
            }
            d.validate()?;
        }
        let ch = self.problem.channels();
        if self.model.in_channels != ch || self.model.out_channels != ch {
            return Err(Error::config(format!("{} has {ch} channels; model maps {} -> {}", self.problem, self.model.in_channels, self.model.out_channels)));
        }
        Ok(())
    }

    /// Dataset recipe: the `data` section, or the problem defaults.
    pub fn data_spec(&self) -> DatasetSpec {
        self.data.clone().unwrap_or_else(|| DatasetSpec::defaults(self.problem))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("experiment config", e.to_string()))
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML with seeds and paths blanked.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.dataset = PathBuf::new();
        c.out = PathBuf::new();
        c.train.seed = 0;
        if let Some(d) = &mut c.data {
            d.seed = 0;
        }
        let text = c.to_toml().expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for (name, _) in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap().unwrap();
            let back = ExperimentConfig::parse(Path::new("x"), &cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg, "{name}");
            if let Some(d) = &cfg.data {
                cfg.model.check_grid(d.grid).unwrap();
            }
        }
    }

    #[test]
    fn desk_presets_match_their_scale() {
        let heat = ExperimentConfig::preset("heat-desk").unwrap().unwrap();
        let d = heat.data_spec();
        assert_eq!((d.grid, d.n_train, d.n_test), (256, 100, 25));
        assert_eq!((heat.model.layers, heat.model.modes, heat.model.width), (2, 32, 32));
        assert_eq!(heat.train.epochs, 500);
        let low = ExperimentConfig::preset("low-synthetic").unwrap().unwrap();
        let m = &low.model;
        assert_eq!((m.layers, m.modes, m.width, m.time_hidden, m.time_sinusoid), (3, 4, 16, 32, 16));
        assert_eq!((low.train.epochs, low.train.batch_size), (1000, 120));
    }

    #[test]
    fn hash_ignores_seeds_and_paths_only() {
        let a = ExperimentConfig::preset("heat-desk").unwrap().unwrap();
        let mut b = a.clone();
        b.train.seed = 9;
        b.data.as_mut().unwrap().seed = 4;
        b.out = "elsewhere".into();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
        b.train.learning_rate = 2e-3;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn parse_error_names_the_line() {
        let text = "problem = \"heat\"\ndataset = \"d\"\nout = \"o\"\n[model]\nlayers = two\n";
        let e = ExperimentConfig::parse(Path::new("cfg.toml"), text).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("cfg.toml") && msg.contains("line 5"), "{msg}");
        assert!(!msg.contains('\n'));
    }

    #[test]
    fn channel_mismatch_rejected() {
        let mut c = ExperimentConfig::preset("low-synthetic").unwrap().unwrap();
        c.model.in_channels = 1;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
