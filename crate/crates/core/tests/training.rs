mod common;

use ctfno::data::{build_dataset, DatasetSpec, Problem};
use ctfno::train::{train, TrainConfig};
use ctfno::{Activation, Ctfno};

use common::small_config;

#[test]
fn single_heat_trajectory_is_fitted() {
    let mut spec = DatasetSpec::defaults(Problem::Heat);
    spec.grid = 64;
    spec.n_train = 1;
    spec.n_test = 0;
    spec.num_times = 10;
    spec.dt = 0.25;
    let ds = build_dataset(&spec).unwrap();
    let mut model = Ctfno::<f64>::init(small_config(2, 16, 16, Activation::Gelu), 3).unwrap();
    let cfg = TrainConfig::new(3e-3, 500, 1);
    let out = train(&mut model, &ds, &cfg).unwrap();
    assert_eq!(out.history.len(), 500);
    let last = out.history.last().unwrap().train_mse;
    assert!(last < 1e-6, "final train MSE {last:e}");
}
