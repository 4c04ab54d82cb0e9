//! Objective, optimizers and the epoch loop.

mod checkpoint;
mod loss;
mod optim;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, ParamEntry, CHECKPOINT_FORMAT};
pub use loss::{mse, rmse, sum_squared_error, PooledError};
pub use optim::{clip_gradients, global_norm, scheduled_lr, AdamSettings, OptimState, OptimizerKind};
pub use trainer::{evaluate, predict, train, train_with, EpochRecord, Sample, TrainConfig, TrainOutcome, SHUFFLE_STREAM};
