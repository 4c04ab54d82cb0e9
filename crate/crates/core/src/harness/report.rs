//! Run records and their consolidation.
//!
//! Every command that produces numbers writes records with the fixed columns
//! `problem,config_hash,seed,metric,value`. `report` merges any number of such
//! files into `merged.csv` (same columns, sorted by key), `aggregate.csv`
//! (`problem,config_hash,metric,runs,mean,std`) and a plain-text table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RECORD_COLUMNS: [&str; 5] = ["problem", "config_hash", "seed", "metric", "value"];
pub const AGGREGATE_COLUMNS: [&str; 6] = ["problem", "config_hash", "metric", "runs", "mean", "std"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub config_hash: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub problem: String,
    pub config_hash: String,
    pub metric: String,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single run.
    pub std: Option<f64>,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path.display().to_string(), e.to_string())
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(Error::format(
            path.display().to_string(),
            format!("expected columns {}, found {}", RECORD_COLUMNS.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    r.deserialize().map(|x| x.map_err(|e| csv_err(path, e))).collect()
}

/// Sorts by `(problem, config_hash, seed, metric)`; later duplicates of a key replace earlier ones.
pub fn merge(records: impl IntoIterator<Item = RunRecord>) -> Vec<RunRecord> {
    let mut map = BTreeMap::new();
    for r in records {
        map.insert((r.problem.clone(), r.config_hash.clone(), r.seed, r.metric.clone()), r);
    }
    map.into_values().collect()
}

/// Mean and sample standard deviation per `(problem, config_hash, metric)` over seeds.
pub fn aggregate(merged: &[RunRecord]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in merged {
        groups.entry((r.problem.clone(), r.config_hash.clone(), r.metric.clone())).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((problem, config_hash, metric), v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let std = (n > 1).then(|| (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt());
            Aggregate { problem, config_hash, metric, runs: n, mean, std }
        })
        .collect()
}

pub fn write_aggregates(path: &Path, rows: &[Aggregate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(AGGREGATE_COLUMNS).map_err(|e| csv_err(path, e))?;
    for a in rows {
        let std = a.std.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([&a.problem, &a.config_hash, &a.metric, &a.runs.to_string(), &a.mean.to_string(), &std])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Table of `test_rmse` (x 1e-2) with configurations as rows and problems as columns.
pub fn summary_table(rows: &[Aggregate]) -> String {
    let picked: Vec<&Aggregate> = rows.iter().filter(|a| a.metric == "test_rmse").collect();
    let mut problems: Vec<&str> = picked.iter().map(|a| a.problem.as_str()).collect();
    problems.sort_unstable();
    problems.dedup();
    let mut configs: Vec<&str> = picked.iter().map(|a| a.config_hash.as_str()).collect();
    configs.sort_unstable();
    configs.dedup();
    let mut out = String::from("test RMSE (x 1e-2), mean +- sample std over seeds\n");
    let _ = write!(out, "{:<18}", "config");
    for p in &problems {
        let _ = write!(out, "{p:>22}");
    }
    out.push('\n');
    for c in &configs {
        let _ = write!(out, "{c:<18}");
        for p in &problems {
            let cell = match picked.iter().find(|a| a.problem == *p && a.config_hash == *c) {
                Some(a) => match a.std {
                    Some(s) => format!("{:.4} +- {:.4}", a.mean * 100.0, s * 100.0),
                    None => format!("{:.4}", a.mean * 100.0),
                },
                None => "-".into(),
            };
            let _ = write!(out, "{cell:>22}");
        }
        out.push('\n');
    }
    out
}

/// Merges record files into `out_dir`; returns the summary text.
pub fn consolidate(inputs: &[&Path], out_dir: &Path) -> Result<String> {
    let mut all = Vec::new();
    for p in inputs {
        all.extend(read_records(p)?);
    }
    let merged = merge(all);
    let agg = aggregate(&merged);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_records(&out_dir.join("merged.csv"), &merged)?;
    write_aggregates(&out_dir.join("aggregate.csv"), &agg)?;
    let text = summary_table(&agg);
    let p = out_dir.join("summary.txt");
    fs::write(&p, &text).map_err(|e| Error::io(&p, e))?;
    Ok(text)
}
