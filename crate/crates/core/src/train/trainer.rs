use serde::{Deserialize, Serialize};

use super::loss::PooledError;
use super::optim::{clip_gradients, scheduled_lr, OptimState, OptimizerKind};
use crate::autograd::{Tape, Value};
use crate::data::{RngStream, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::model::{record_network, Ctfno, ParamSlots};
use crate::scalar::Real;
use crate::spectral::Tensor;

/// Stream index of the epoch shuffler; dataset trajectories use `0..count`.
pub const SHUFFLE_STREAM: u64 = 0x2000_0000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "unit")]
    pub decay: f64,
    #[serde(default = "hundred")]
    pub decay_interval: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm threshold.
    #[serde(default)]
    pub clip: Option<f64>,
    /// Row `L1` bound; overrides the model's own setting when present.
    #[serde(default)]
    pub stabilization: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Test RMSE is computed every `eval_every` epochs and always after the last one.
    #[serde(default = "one")]
    pub eval_every: usize,
}

fn unit() -> f64 {
    1.0
}

fn hundred() -> usize {
    100
}

fn one() -> usize {
    1
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize, batch_size: usize) -> Self {
        Self {
            learning_rate,
            decay: 1.0,
            decay_interval: 100,
            epochs,
            batch_size,
            clip: None,
            stabilization: None,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            eval_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::config(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if self.decay_interval == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::config("decay_interval, batch_size and eval_every must be positive"));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::config(format!("clip threshold must be positive, got {c}")));
            }
        }
        if let Some(m) = self.stabilization {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::config(format!("stabilization bound must be positive, got {m}")));
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        scheduled_lr(self.learning_rate, self.decay, self.decay_interval, epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean of the batch losses seen during the epoch, weighted by entries.
    pub train_mse: f64,
    pub test_rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Pooled RMSE of the final parameters on the training split.
    pub final_train_rmse: f64,
    pub final_test_rmse: Option<f64>,
    /// Draw count of the shuffle stream after the last epoch.
    pub rng_position: u64,
}

/// A trajectory in the model's channels-first layout.
#[derive(Debug, Clone)]
pub struct Sample<T> {
    /// `[1, channels, grid]`
    pub initial: Tensor<T>,
    /// `[times, channels, grid]`
    pub target: Tensor<T>,
}

impl<T: Real> Sample<T> {
    pub fn from_dataset(ds: &TrajectoryDataset, i: usize) -> Result<Self> {
        let (nt, n, ch) = (ds.times.len(), ds.grid(), ds.channels());
        let cast = |x: &[f64]| x.iter().map(|&v| T::lit(v)).collect::<Vec<T>>();
        let initial = Tensor::new(vec![1, n, ch], cast(ds.initial_state(i)))?.transpose_last2()?;
        let target = Tensor::new(vec![nt, n, ch], cast(ds.trajectory(i)))?.transpose_last2()?;
        Ok(Self { initial, target })
    }
}

fn times_of<T: Real>(ds: &TrajectoryDataset) -> Vec<T> {
    ds.times.iter().map(|&t| T::lit(t)).collect()
}

fn check_compatible<T: Real>(model: &Ctfno<T>, ds: &TrajectoryDataset) -> Result<()> {
    let c = model.config();
    if c.in_channels != ds.channels() || c.out_channels != ds.channels() {
        return Err(Error::shape(format!(
            "model maps {} -> {} channels, dataset has {}",
            c.in_channels,
            c.out_channels,
            ds.channels()
        )));
    }
    c.check_grid(ds.grid())
}

/// Channels-first prediction `[times, d_u, grid]` for one initial state `[1, d_a, grid]`.
pub fn predict<T: Real>(model: &Ctfno<T>, initial: &Tensor<T>, times: &[T]) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let slots = ParamSlots::record(&mut tape, model.params(), false);
    let input = tape.constant(initial.clone());
    let y = record_network(&mut tape, model.config(), &slots, input, times)?;
    Ok(tape.real(y)?.clone())
}

/// Pooled squared error of `model` over the listed trajectories, visited in order.
pub fn evaluate<T: Real>(
    model: &Ctfno<T>,
    ds: &TrajectoryDataset,
    indices: impl IntoIterator<Item = usize>,
) -> Result<PooledError> {
    check_compatible(model, ds)?;
    let times = times_of::<T>(ds);
    let mut pooled = PooledError::default();
    for i in indices {
        let s = Sample::<T>::from_dataset(ds, i)?;
        pooled.add(&predict(model, &s.initial, &times)?, &s.target)?;
    }
    Ok(pooled)
}

/// Trains `model` in place on the dataset's training split.
pub fn train<T: Real>(model: &mut Ctfno<T>, ds: &TrajectoryDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, ds, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<T: Real>(
    model: &mut Ctfno<T>,
    ds: &TrajectoryDataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    ds.check()?;
    if ds.spec.n_train == 0 {
        return Err(Error::config("training split is empty"));
    }
    if let Some(m) = config.stabilization {
        if model.config().stabilization != Some(m) {
            let (mut c, p) = model.clone().into_parts();
            c.stabilization = Some(m);
            *model = Ctfno::new(c, p)?;
        }
    }
    model.project();
    check_compatible(model, ds)?;

    let times = times_of::<T>(ds);
    let train_samples = ds.train_indices().map(|i| Sample::<T>::from_dataset(ds, i)).collect::<Result<Vec<_>>>()?;
    let has_test = ds.spec.n_test > 0;
    let per_sample = train_samples[0].target.len();

    let mut values = model.params().to_values();
    let mut optim = OptimState::new(config.optimizer, &values);
    let mut rng = RngStream::new(config.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        rng.shuffle(&mut order);
        let mut epoch_sum = 0.0;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut batch = chunk.to_vec();
            batch.sort_unstable();
            let denom = T::lit((batch.len() * per_sample) as f64);
            let mut grads: Vec<Value<T>> = values.iter().map(Value::zeros_like).collect();
            let mut batch_loss = 0.0;
            for &i in &batch {
                let s = &train_samples[i];
                let mut tape = Tape::new();
                let (slots, y) = model.record_trajectory(&mut tape, &s.initial, &times)?;
                let loss = tape.mse_against(y, &s.target, denom)?;
                batch_loss += tape.real(loss)?.item()?.to_f64_lossy();
                let g = tape.backward(loss)?;
                for (acc, slot) in grads.iter_mut().zip(slots.canonical()) {
                    if let Some(gi) = g.get(slot) {
                        acc.accumulate(gi);
                    }
                }
            }
            let finite_grads = grads.iter().all(|g| g.flat().iter().all(|x| x.is_finite()));
            if !batch_loss.is_finite() || !finite_grads {
                return Err(Error::Divergence { epoch, batch: batch_no, loss: batch_loss });
            }
            epoch_sum += batch_loss * batch.len() as f64;
            if let Some(c) = config.clip {
                clip_gradients(&mut grads, T::lit(c));
            }
            optim.step(&mut values, &grads, lr)?;
            model.set_values(std::mem::take(&mut values))?;
            model.project();
            values = model.params().to_values();
        }
        let last = epoch + 1 == config.epochs;
        let test_rmse = if has_test && (last || (epoch + 1) % config.eval_every == 0) {
            Some(evaluate(model, ds, ds.test_indices())?.rmse())
        } else {
            None
        };
        let record = EpochRecord { epoch, lr, train_mse: epoch_sum / train_samples.len() as f64, test_rmse };
        on_epoch(&record);
        history.push(record);
    }

    let final_train_rmse = evaluate(model, ds, ds.train_indices())?.rmse();
    let final_test_rmse = match history.last() {
        Some(r) => r.test_rmse,
        None if has_test => Some(evaluate(model, ds, ds.test_indices())?.rmse()),
        None => None,
    };
    Ok(TrainOutcome { history, final_train_rmse, final_test_rmse, rng_position: rng.position() as u64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_dataset, DatasetSpec, Problem};
    use crate::model::{is_feasible, CtfnoConfig};
    use crate::spectral::Activation;

    fn tiny_dataset() -> TrajectoryDataset {
        let mut spec = DatasetSpec::defaults(Problem::Heat);
        spec.grid = 16;
        spec.n_train = 3;
        spec.n_test = 1;
        spec.num_times = 4;
        spec.dt = 0.2;
        spec.nu = Some(0.01);
        build_dataset(&spec).unwrap()
    }

    fn tiny_model() -> CtfnoConfig {
        CtfnoConfig {
            layers: 1,
            modes: 4,
            width: 4,
            in_channels: 1,
            out_channels: 1,
            time_hidden: 3,
            time_sinusoid: 2,
            heads: 1,
            padding: 0,
            stabilization: None,
            activation: Activation::Gelu,
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::new(1e-3, 1, 1);
        assert!(c.validate().is_ok());
        c.decay = 1.5;
        assert!(c.validate().is_err());
        c.decay = 0.8;
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn history_and_determinism() {
        let ds = tiny_dataset();
        let cfg = TrainConfig { seed: 5, ..TrainConfig::new(1e-2, 6, 2) };
        let run = || {
            let mut m = Ctfno::<f64>::init(tiny_model(), 1).unwrap();
            let out = train(&mut m, &ds, &cfg).unwrap();
            (out, m)
        };
        let (a, ma) = run();
        let (b, mb) = run();
        assert_eq!(a.history.len(), 6);
        assert_eq!(a.history, b.history);
        assert_eq!(ma.params().flatten(), mb.params().flatten());
        assert!(a.history.iter().all(|r| r.test_rmse.is_some()));
        assert!(a.history.last().unwrap().train_mse < a.history[0].train_mse);
        let direct = evaluate(&ma, &ds, ds.test_indices()).unwrap().rmse();
        assert_eq!(Some(direct), a.final_test_rmse);
    }

    #[test]
    fn projection_holds_after_every_epoch() {
        let ds = tiny_dataset();
        let cfg = TrainConfig { stabilization: Some(1.2), ..TrainConfig::new(5e-2, 3, 1) };
        let mut m = Ctfno::<f64>::init(tiny_model(), 2).unwrap();
        train(&mut m, &ds, &cfg).unwrap();
        assert_eq!(m.config().stabilization, Some(1.2));
        assert!(is_feasible(m.params(), 1.2));
    }

    #[test]
    fn divergence_is_reported() {
        let mut ds = tiny_dataset();
        ds.trajectories[0] = f64::NAN;
        let mut m = Ctfno::<f64>::init(tiny_model(), 1).unwrap();
        let cfg = TrainConfig::new(1e-3, 2, 10);
        match train(&mut m, &ds, &cfg) {
            Err(Error::Divergence { epoch: 0, batch: 0, loss }) => assert!(loss.is_nan()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eval_every_skips_epochs() {
        let ds = tiny_dataset();
        let cfg = TrainConfig { eval_every: 2, ..TrainConfig::new(1e-3, 3, 4) };
        let mut m = Ctfno::<f64>::init(tiny_model(), 1).unwrap();
        let out = train(&mut m, &ds, &cfg).unwrap();
        let flags: Vec<bool> = out.history.iter().map(|r| r.test_rmse.is_some()).collect();
        assert_eq!(flags, vec![false, true, true]);
    }
}
