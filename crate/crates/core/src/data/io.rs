use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSpec, TrajectoryDataset, GENERATOR_VERSION};
use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "ctfno-dataset";

/// Writes `values` as consecutive little-endian `f64`.
pub fn write_f64_le(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads exactly `expected` little-endian `f64` values.
pub fn read_f64_le(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 8 {
        return Err(Error::format(
            path.display().to_string(),
            format!("expected {} bytes ({expected} values), found {}", expected * 8, bytes.len()),
        ));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::format(path.display().to_string(), e.to_string().trim().replace('\n', " ")))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetMeta {
    format: String,
    generator_version: u32,
    /// `[count, num_times, grid, channels]`
    shape: [usize; 4],
    times: Vec<f64>,
    spec: DatasetSpec,
}

/// Writes `meta`, `data.bin` and `initial.bin` into `dir` (created if missing).
pub fn save_dataset(ds: &TrajectoryDataset, dir: &Path) -> Result<()> {
    ds.check()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        format: DATASET_FORMAT.into(),
        generator_version: GENERATOR_VERSION,
        shape: [ds.count(), ds.times.len(), ds.grid(), ds.channels()],
        times: ds.times.clone(),
        spec: ds.spec.clone(),
    };
    let text = toml::to_string(&meta).map_err(|e| Error::format("dataset meta", e.to_string()))?;
    let meta_path = dir.join("meta");
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    write_f64_le(&dir.join("data.bin"), &ds.trajectories)?;
    write_f64_le(&dir.join("initial.bin"), &ds.initial)
}

pub fn load_dataset(dir: &Path) -> Result<TrajectoryDataset> {
    let meta_path = dir.join("meta");
    let meta: DatasetMeta = parse_toml(&meta_path, &read_text(&meta_path)?)?;
    if meta.format != DATASET_FORMAT {
        return Err(Error::format(meta_path.display().to_string(), format!("not a dataset (format '{}')", meta.format)));
    }
    let [count, nt, grid, ch] = meta.shape;
    if count != meta.spec.count() || nt != meta.times.len() || grid != meta.spec.grid || ch != meta.spec.channels() {
        return Err(Error::format(meta_path.display().to_string(), "shape disagrees with spec"));
    }
    let trajectories = read_f64_le(&dir.join("data.bin"), count * nt * grid * ch)?;
    let initial = read_f64_le(&dir.join("initial.bin"), count * grid * ch)?;
    let ds = TrajectoryDataset { spec: meta.spec, times: meta.times, trajectories, initial };
    ds.check()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::super::dataset::{build_dataset, Problem};
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut spec = DatasetSpec::defaults(Problem::Heat);
        spec.grid = 16;
        spec.n_train = 2;
        spec.n_test = 1;
        spec.num_times = 3;
        let ds = build_dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        let bytes = fs::read(dir.path().join("data.bin")).unwrap();
        assert_eq!(&bytes[..8], &ds.trajectories[0].to_le_bytes());
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_f64_le(&p, &[1.0, 2.0]).unwrap();
        assert!(read_f64_le(&p, 2).is_ok());
        assert!(matches!(read_f64_le(&p, 3), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_directory_is_io_error() {
        let r = load_dataset(Path::new("/nonexistent/dataset"));
        assert!(matches!(r, Err(Error::Io { .. })));
    }
}
