//! Checkpoint directories: a `meta` TOML document and `params.bin`.
//!
//! `params.bin` holds every parameter as little-endian `f64`, arrays
//! concatenated in the canonical order of [`CtfnoParams::shapes`]:
//! `phi` encoder (`w1, b1, w2, b2`), `psi` encoder, `lift`, then per layer
//! `weight, bias, kernel, time_modes, channel_mod`, then `proj`. Complex
//! arrays are stored as interleaved `(re, im)` pairs in row-major order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trainer::TrainConfig;
use crate::data::{parse_toml, read_f64_le, read_text, write_f64_le, DatasetSpec};
use crate::error::{Error, Result};
use crate::model::{Ctfno, CtfnoConfig, CtfnoParams};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT: &str = "ctfno-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub complex: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format: String,
    /// Completed epochs.
    pub epoch: usize,
    /// Seed and draw count of the shuffle stream.
    pub rng_seed: u64,
    pub rng_position: u64,
    pub model: CtfnoConfig,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    /// Hash of the experiment config that produced the checkpoint.
    #[serde(default)]
    pub config_hash: Option<String>,
    pub params: Vec<ParamEntry>,
}

impl CheckpointMeta {
    pub fn new(model: &CtfnoConfig) -> Self {
        let params = CtfnoParams::<f64>::names(model)
            .into_iter()
            .zip(CtfnoParams::<f64>::shapes(model))
            .map(|(name, (shape, complex))| ParamEntry { name, shape, complex })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            epoch: 0,
            rng_seed: 0,
            rng_position: 0,
            model: model.clone(),
            train: None,
            dataset: None,
            config_hash: None,
            params,
        }
    }
}

pub fn save_checkpoint<T: Real>(model: &Ctfno<T>, meta: &CheckpointMeta, dir: &Path) -> Result<()> {
    if &meta.model != model.config() {
        return Err(Error::config("checkpoint meta describes a different model"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let text = toml::to_string(meta).map_err(|e| Error::format("checkpoint meta", e.to_string()))?;
    let meta_path = dir.join("meta");
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    let flat: Vec<f64> = model.params().flatten().into_iter().map(|x| x.to_f64_lossy()).collect();
    write_f64_le(&dir.join("params.bin"), &flat)
}

pub fn load_checkpoint(dir: &Path) -> Result<(Ctfno<f64>, CheckpointMeta)> {
    let meta_path = dir.join("meta");
    let meta: CheckpointMeta = parse_toml(&meta_path, &read_text(&meta_path)?)?;
    if meta.format != CHECKPOINT_FORMAT {
        return Err(Error::format(meta_path.display().to_string(), format!("not a checkpoint (format '{}')", meta.format)));
    }
    meta.model.validate()?;
    if meta.params != CheckpointMeta::new(&meta.model).params {
        return Err(Error::format(meta_path.display().to_string(), "parameter table disagrees with the model config"));
    }
    let total: usize = meta.params.iter().map(|p| p.shape.iter().product::<usize>() * if p.complex { 2 } else { 1 }).sum();
    let flat = read_f64_le(&dir.join("params.bin"), total)?;
    let params = CtfnoParams::unflatten(&meta.model, &flat)?;
    Ok((Ctfno::new(meta.model.clone(), params)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Activation;

    fn cfg() -> CtfnoConfig {
        CtfnoConfig {
            layers: 2,
            modes: 3,
            width: 4,
            in_channels: 2,
            out_channels: 2,
            time_hidden: 3,
            time_sinusoid: 2,
            heads: 2,
            padding: 1,
            stabilization: Some(1.2),
            activation: Activation::Silu,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = Ctfno::<f64>::init(cfg(), 9).unwrap();
        let mut meta = CheckpointMeta::new(m.config());
        meta.epoch = 7;
        meta.rng_position = 123;
        meta.train = Some(TrainConfig::new(1e-3, 7, 2));
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&m, &meta, dir.path()).unwrap();
        let (back, bm) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(bm, meta);
        assert_eq!(back, m);
        let bytes = fs::read(dir.path().join("params.bin")).unwrap();
        assert_eq!(bytes.len(), 8 * m.params().flatten().len());
        assert_eq!(&bytes[..8], &m.params().phi_enc.w1.data()[0].to_le_bytes());
    }

    #[test]
    fn param_count_matches_table() {
        let c = cfg();
        let meta = CheckpointMeta::new(&c);
        let n: usize = meta.params.iter().map(|p| p.shape.iter().product::<usize>() * if p.complex { 2 } else { 1 }).sum();
        assert_eq!(n, c.param_count());
    }

    #[test]
    fn truncated_params_rejected() {
        let m = Ctfno::<f64>::init(cfg(), 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&m, &CheckpointMeta::new(m.config()), dir.path()).unwrap();
        let p = dir.path().join("params.bin");
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format { .. })));
    }
}
