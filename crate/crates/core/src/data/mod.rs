//! Generators for the benchmark dynamics and the on-disk dataset format.

mod dataset;
mod grf;
mod io;
mod ode;
mod pde;
mod rng;

pub use dataset::{build_dataset, sample_reaction_initial, DatasetSpec, Problem, TrajectoryDataset, GENERATOR_VERSION};
pub use grf::{sample_grf, GrfSpec};
pub use io::{load_dataset, read_f64_le, save_dataset, write_f64_le, DATASET_FORMAT};
pub(crate) use io::{parse_toml, read_text};
pub use ode::{
    gen_sawtooth, gen_spiral, gen_spiral_with_step, gen_square, gen_stiff_vdp, gen_stiff_vdp_with, sawtooth,
    spiral_lyapunov, spiral_rhs, square, StiffOptions,
};
pub use pde::{solve_burgers, solve_burgers_observed, solve_heat, solve_reaction, BurgersObserver};
pub use rng::RngStream;
