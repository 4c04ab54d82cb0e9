//! Command-line grammar and the drivers behind each subcommand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use super::config::ExperimentConfig;
use super::probe::probe_network;
use super::report::{consolidate, write_records, RunRecord};
use crate::data::{build_dataset, load_dataset, save_dataset, DatasetSpec, Problem, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::model::Ctfno;
use crate::spectral::resample;
use crate::train::{
    evaluate, load_checkpoint, predict, save_checkpoint, train_with, CheckpointMeta, EpochRecord, PooledError,
    Sample,
};

#[derive(Debug, Parser)]
#[command(name = "ctfno", version, about = "Continuous-time Fourier neural operator experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a trajectory dataset.
    Generate(GenerateArgs),
    /// Train a model from an experiment config.
    Train(TrainArgs),
    /// Pooled RMSE of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Perturbation amplification against the stability bounds.
    Probe(ProbeArgs),
    /// Merge record files into aggregate tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Problem tag; defaults apply unless overridden.
    #[arg(long)]
    pub problem: Option<Problem>,
    /// Experiment config (file or preset name) whose data section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub num_times: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset directory; defaults to the config's dataset path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment config file or preset name.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the training (and initialization) seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Spectrally resample inputs and targets to this grid first.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Directory for `eval.csv` records.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `probe.csv` records.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Record files (`problem,config_hash,seed,metric,value`).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one command; the returned text is the stdout summary.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a, |r| {
            if let Some(t) = r.test_rmse {
                eprintln!("epoch {} lr {:.3e} train_mse {:.6e} test_rmse {t:.6e}", r.epoch + 1, r.lr, r.train_mse);
            }
        }),
        Command::Eval(a) => cmd_eval(&a),
        Command::Probe(a) => cmd_probe(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<String> {
    let cfg = a.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let mut spec = match (&cfg, a.problem) {
        (Some(c), Some(p)) if c.problem != p => {
            return Err(Error::config(format!("--problem {p} conflicts with config problem {}", c.problem)));
        }
        (Some(c), _) => c.data_spec(),
        (None, Some(p)) => DatasetSpec::defaults(p),
        (None, None) => return Err(Error::config("generate needs --problem or --config")),
    };
    if let Some(v) = a.n_train {
        spec.n_train = v;
    }
    if let Some(v) = a.n_test {
        spec.n_test = v;
    }
    if let Some(v) = a.grid {
        spec.grid = v;
    }
    if let Some(v) = a.num_times {
        spec.num_times = v;
    }
    if let Some(v) = a.dt {
        spec.dt = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    let out = match (&a.out, &cfg) {
        (Some(o), _) => o.clone(),
        (None, Some(c)) => c.dataset.clone(),
        (None, None) => return Err(Error::config("generate needs --out")),
    };
    spec.validate()?;
    let ds = build_dataset(&spec)?;
    save_dataset(&ds, &out)?;
    Ok(format!(
        "generated {} ({} train, {} test, {} times, grid {}) in {}",
        spec.problem,
        spec.n_train,
        spec.n_test,
        spec.num_times,
        spec.grid,
        out.display()
    ))
}

fn open_dataset(path: &Path) -> Result<TrajectoryDataset> {
    if !path.is_dir() {
        return Err(Error::config(format!("dataset directory {} does not exist", path.display())));
    }
    load_dataset(path)
}

fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,lr,train_mse,test_rmse\n");
    for r in history {
        let test = r.test_rmse.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", r.epoch, r.lr, r.train_mse, test);
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn record(problem: Problem, hash: &str, seed: u64, metric: impl Into<String>, value: f64) -> RunRecord {
    RunRecord { problem: problem.name().into(), config_hash: hash.into(), seed, metric: metric.into(), value }
}

/// Trains per the config and writes `checkpoint/`, `config.toml`, `history.csv` and `summary.csv` under the output directory.
pub fn cmd_train(a: &TrainArgs, mut progress: impl FnMut(&EpochRecord)) -> Result<String> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(d) = &a.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    let ds = open_dataset(&cfg.dataset)?;
    if ds.spec.problem != cfg.problem {
        return Err(Error::config(format!("dataset holds {}, config expects {}", ds.spec.problem, cfg.problem)));
    }
    let hash = cfg.config_hash();
    let mut model = Ctfno::<f64>::init(cfg.model.clone(), cfg.train.seed)?;
    let started = Instant::now();
    let outcome = train_with(&mut model, &ds, &cfg.train, |r| progress(r))?;
    let seconds = started.elapsed().as_secs_f64();

    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut meta = CheckpointMeta::new(model.config());
    meta.epoch = cfg.train.epochs;
    meta.rng_seed = cfg.train.seed;
    meta.rng_position = outcome.rng_position;
    meta.train = Some(cfg.train.clone());
    meta.dataset = Some(ds.spec.clone());
    meta.config_hash = Some(hash.clone());
    save_checkpoint(&model, &meta, &cfg.out.join("checkpoint"))?;
    write_text(&cfg.out.join("config.toml"), &cfg.to_toml()?)?;
    write_text(&cfg.out.join("history.csv"), &history_csv(&outcome.history))?;
    let mut records = vec![record(cfg.problem, &hash, cfg.train.seed, "train_rmse", outcome.final_train_rmse)];
    if let Some(t) = outcome.final_test_rmse {
        records.push(record(cfg.problem, &hash, cfg.train.seed, "test_rmse", t));
    }
    write_records(&cfg.out.join("summary.csv"), &records)?;
    let test = outcome.final_test_rmse.map_or("-".into(), |t| format!("{t:.6e}"));
    Ok(format!(
        "trained {} [{hash}] seed {}: train_rmse {:.6e}, test_rmse {test}, {} epochs in {seconds:.1} s -> {}",
        cfg.problem,
        cfg.train.seed,
        outcome.final_train_rmse,
        cfg.train.epochs,
        cfg.out.display()
    ))
}

/// Pooled error over `indices` with inputs and targets resampled to `n` points.
pub fn evaluate_at_resolution(
    model: &Ctfno<f64>,
    ds: &TrajectoryDataset,
    indices: impl IntoIterator<Item = usize>,
    n: usize,
) -> Result<PooledError> {
    if !ds.spec.problem.is_field() {
        return Err(Error::config(format!("{} has no spatial grid to resample", ds.spec.problem)));
    }
    model.config().check_grid(n)?;
    let times = ds.times.clone();
    let mut pooled = PooledError::default();
    for i in indices {
        let s = Sample::<f64>::from_dataset(ds, i)?;
        let pred = predict(model, &resample(&s.initial, n)?, &times)?;
        pooled.add(&pred, &resample(&s.target, n)?)?;
    }
    Ok(pooled)
}

fn checkpoint_seed_and_hash(meta: &CheckpointMeta) -> (u64, String) {
    (meta.rng_seed, meta.config_hash.clone().unwrap_or_else(|| "unknown".into()))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let (model, meta) = load_checkpoint(&a.checkpoint)?;
    let ds = open_dataset(&a.dataset)?;
    let problem = ds.spec.problem;
    if let Some(d) = &meta.dataset {
        if d.problem != problem {
            return Err(Error::shape(format!("checkpoint was trained on {}, dataset holds {problem}", d.problem)));
        }
    }
    let (seed, hash) = checkpoint_seed_and_hash(&meta);
    let suffix = a.resolution.map_or(String::new(), |n| format!("@{n}"));
    let eval = |r: std::ops::Range<usize>| match a.resolution {
        None => evaluate(&model, &ds, r),
        Some(n) => evaluate_at_resolution(&model, &ds, r, n),
    };
    let mut records = Vec::new();
    let mut line = format!("eval {problem} [{hash}]");
    for (name, range) in [("train_rmse", ds.train_indices()), ("test_rmse", ds.test_indices())] {
        if range.is_empty() {
            continue;
        }
        let v = eval(range)?.rmse();
        let metric = format!("{name}{suffix}");
        let _ = write!(line, " {metric} {v:.6e}");
        records.push(record(problem, &hash, seed, metric, v));
    }
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_records(&out.join("eval.csv"), &records)?;
    }
    Ok(line)
}

pub fn cmd_probe(a: &ProbeArgs) -> Result<String> {
    let (model, meta) = load_checkpoint(&a.checkpoint)?;
    let ds = open_dataset(&a.dataset)?;
    let indices: Vec<usize> = if ds.spec.n_test > 0 { ds.test_indices().collect() } else { ds.train_indices().collect() };
    let r = probe_network(&model, &ds, &indices, a.epsilon, a.trials, a.seed)?;
    let (seed, hash) = checkpoint_seed_and_hash(&meta);
    let problem = ds.spec.problem;
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let records = vec![
            record(problem, &hash, seed, "probe_max_ratio", r.max_ratio),
            record(problem, &hash, seed, "probe_mean_ratio", r.mean_ratio),
            record(problem, &hash, seed, "probe_gershgorin_bound", r.gershgorin_bound),
            record(problem, &hash, seed, "probe_operator_bound", r.operator_bound),
        ];
        write_records(&out.join("probe.csv"), &records)?;
    }
    Ok(format!(
        "probe {problem} [{hash}] eps {:e}, {} trials: max ratio {:.6e}, mean ratio {:.6e}, row-norm bound {:.6e}, operator bound {:.6e}",
        r.epsilon, r.trials, r.max_ratio, r.mean_ratio, r.gershgorin_bound, r.operator_bound
    ))
}

pub fn cmd_report(a: &ReportArgs) -> Result<String> {
    let inputs: Vec<&Path> = a.inputs.iter().map(PathBuf::as_path).collect();
    consolidate(&inputs, &a.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ctfno").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grammar_accepts_documented_flags() {
        parse(&["generate", "--problem", "heat", "--n-train", "4", "--dt", "0.1", "--seed", "3", "--out", "d"]);
        parse(&["train", "--config", "heat-desk", "--dataset", "d", "--out", "o", "--seed", "1"]);
        parse(&["eval", "--checkpoint", "c", "--dataset", "d", "--resolution", "512"]);
        parse(&["probe", "--checkpoint", "c", "--dataset", "d", "--epsilon", "1e-5", "--trials", "10"]);
        parse(&["report", "a.csv", "b.csv", "--out", "r"]);
        assert!(Cli::try_parse_from(["ctfno", "generate", "--problem", "wave"]).is_err());
    }

    #[test]
    fn missing_dataset_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let a = TrainArgs {
            config: "low-synthetic".into(),
            dataset: Some(dir.path().join("absent")),
            out: Some(dir.path().join("o")),
            seed: None,
        };
        let e = cmd_train(&a, |_| {}).unwrap_err();
        assert!(e.is_usage());
        assert!(!e.to_string().contains('\n'));
    }

    #[test]
    fn generate_honours_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d");
        let cli = parse(&["generate", "--problem", "reaction", "--n-train", "3", "--n-test", "1", "--grid", "20", "--num-times", "4", "--out", out.to_str().unwrap()]);
        run(cli).unwrap();
        let ds = load_dataset(&out).unwrap();
        assert_eq!((ds.spec.n_train, ds.spec.n_test, ds.grid(), ds.times.len()), (3, 1, 20, 4));
    }
}
