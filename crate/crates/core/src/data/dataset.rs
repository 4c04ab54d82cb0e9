use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grf::{sample_grf, GrfSpec};
use super::ode::{gen_spiral, gen_square, gen_sawtooth, gen_stiff_vdp_with, StiffOptions};
use super::pde::{solve_burgers, solve_heat, solve_reaction};
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Version stamp written to dataset metadata; bump when generated bytes change.
pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Heat,
    Burgers,
    Reaction,
    Spiral,
    Stiff,
    Sawtooth,
    Square,
}

impl Problem {
    pub const ALL: [Problem; 7] = [
        Problem::Heat,
        Problem::Burgers,
        Problem::Reaction,
        Problem::Spiral,
        Problem::Stiff,
        Problem::Sawtooth,
        Problem::Square,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Problem::Heat => "heat",
            Problem::Burgers => "burgers",
            Problem::Reaction => "reaction",
            Problem::Spiral => "spiral",
            Problem::Stiff => "stiff",
            Problem::Sawtooth => "sawtooth",
            Problem::Square => "square",
        }
    }

    /// Problems whose state is a spatial field (as opposed to a single point).
    pub fn is_field(self) -> bool {
        matches!(self, Problem::Heat | Problem::Burgers | Problem::Reaction)
    }

    pub fn channels(self) -> usize {
        match self {
            Problem::Spiral | Problem::Stiff => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown problem '{s}' (expected one of heat, burgers, reaction, spiral, stiff, sawtooth, square)")))
    }
}

/// Everything that determines a generated dataset.
///
/// Sample times are `dt, 2 dt, ..., num_times dt` (offsets from `t0` for the
/// waveform problems). Field problems live on `grid` points `x_j = j / grid`;
/// point problems use `grid = 1` with the state in the channel axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub problem: Problem,
    pub grid: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub dt: f64,
    pub num_times: usize,
    pub seed: u64,
    /// Diffusivity (heat) or viscosity (Burgers).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Micro-step of the Burgers solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grf: Option<GrfSpec>,
    /// Stiffness parameter of the Van der Pol problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl DatasetSpec {
    pub fn defaults(problem: Problem) -> Self {
        let base = Self {
            problem,
            grid: 1,
            n_train: 400,
            n_test: 100,
            dt: 0.2,
            num_times: 100,
            seed: 0,
            nu: None,
            solver_dt: None,
            rho: None,
            grf: None,
            mu: None,
        };
        match problem {
            Problem::Heat => Self {
                grid: 1024,
                dt: 0.05,
                num_times: 50,
                nu: Some(0.001),
                grf: Some(GrfSpec { sigma: 20.0, tau: 3.5, alpha: 2.5 }),
                ..base
            },
            Problem::Burgers => Self {
                grid: 1024,
                dt: 0.005,
                num_times: 200,
                nu: Some(0.001),
                solver_dt: Some(1e-4),
                grf: Some(GrfSpec { sigma: 7.0, tau: 7.0, alpha: 2.5 }),
                ..base
            },
            Problem::Reaction => Self { grid: 100, dt: 0.02, num_times: 50, rho: Some(6.0), ..base },
            Problem::Spiral => Self { dt: 0.1, ..base },
            Problem::Stiff => Self { mu: Some(1000.0), ..base },
            Problem::Sawtooth | Problem::Square => base,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.num_times).map(|j| j as f64 * self.dt).collect()
    }

    pub fn channels(&self) -> usize {
        self.problem.channels()
    }

    pub fn count(&self) -> usize {
        self.n_train + self.n_test
    }

    fn need(&self, value: Option<f64>, name: &str) -> Result<f64> {
        value.ok_or_else(|| Error::config(format!("{} datasets need '{name}'", self.problem)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.count() == 0 || self.num_times == 0 {
            return Err(Error::config("dataset needs at least one trajectory and one sample time"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.problem.is_field() {
            if self.grid < 4 || (self.problem != Problem::Reaction && self.grid % 2 != 0) {
                return Err(Error::config(format!("{} needs an even grid of at least 4, got {}", self.problem, self.grid)));
            }
        } else if self.grid != 1 {
            return Err(Error::config(format!("{} trajectories are points; grid must be 1", self.problem)));
        }
        match self.problem {
            Problem::Heat => {
                self.need(self.nu, "nu")?;
                self.grf.ok_or_else(|| Error::config("heat datasets need 'grf'"))?.validate()?;
            }
            Problem::Burgers => {
                self.need(self.nu, "nu")?;
                let h = self.need(self.solver_dt, "solver_dt")?;
                let ratio = self.dt / h;
                if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio < 0.5 {
                    return Err(Error::config(format!("dt {} is not a multiple of solver_dt {h}", self.dt)));
                }
                self.grf.ok_or_else(|| Error::config("burgers datasets need 'grf'"))?.validate()?;
            }
            Problem::Reaction => {
                self.need(self.rho, "rho")?;
            }
            Problem::Stiff => {
                self.need(self.mu, "mu")?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// `1/2 (z1 sin(2 pi k1 x) + z2 sin(2 pi k2 x)) + z3 exp(-x) + 2` with
/// `z_i ~ N(0, 1)` and `k_i` uniform on `1..=5`, affinely mapped onto
/// `[0.05, 0.95]`. Draw order: `z1, z2, z3, k1, k2`.
pub fn sample_reaction_initial(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let z = [rng.normal(), rng.normal(), rng.normal()];
    let k = [rng.uniform_int(1, 5) as f64, rng.uniform_int(1, 5) as f64];
    let raw: Vec<f64> = (0..n)
        .map(|j| {
            let x = j as f64 / n as f64;
            let tau = std::f64::consts::TAU;
            0.5 * (z[0] * (tau * k[0] * x).sin() + z[1] * (tau * k[1] * x).sin()) + z[2] * (-x).exp() + 2.0
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return vec![0.5; n];
    }
    raw.iter().map(|v| 0.05 + 0.9 * (v - lo) / (hi - lo)).collect()
}

/// Generated trajectories with their initial states.
///
/// `trajectories` is row-major `[count, num_times, grid, channels]` and
/// `initial` is `[count, grid, channels]`. The first `n_train` entries form
/// the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub spec: DatasetSpec,
    pub times: Vec<f64>,
    pub trajectories: Vec<f64>,
    pub initial: Vec<f64>,
}

impl TrajectoryDataset {
    pub fn count(&self) -> usize {
        self.spec.count()
    }

    pub fn grid(&self) -> usize {
        self.spec.grid
    }

    pub fn channels(&self) -> usize {
        self.spec.channels()
    }

    fn traj_len(&self) -> usize {
        self.times.len() * self.grid() * self.channels()
    }

    pub fn trajectory(&self, i: usize) -> &[f64] {
        let l = self.traj_len();
        &self.trajectories[i * l..(i + 1) * l]
    }

    pub fn initial_state(&self, i: usize) -> &[f64] {
        let l = self.grid() * self.channels();
        &self.initial[i * l..(i + 1) * l]
    }

    pub fn train_indices(&self) -> std::ops::Range<usize> {
        0..self.spec.n_train
    }

    pub fn test_indices(&self) -> std::ops::Range<usize> {
        self.spec.n_train..self.count()
    }

    /// Checks buffer lengths against the spec.
    pub fn check(&self) -> Result<()> {
        if self.times.len() != self.spec.num_times {
            return Err(Error::shape(format!("{} times for num_times = {}", self.times.len(), self.spec.num_times)));
        }
        if self.trajectories.len() != self.count() * self.traj_len()
            || self.initial.len() != self.count() * self.grid() * self.channels()
        {
            return Err(Error::shape("dataset buffers do not match the spec"));
        }
        Ok(())
    }
}

/// One trajectory: `(initial [grid, ch], trajectory [times, grid, ch])`.
fn generate_one(spec: &DatasetSpec, times: &[f64], index: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = RngStream::new(spec.seed, index);
    let n = spec.grid;
    match spec.problem {
        Problem::Heat => {
            let u0 = sample_grf(spec.grf.as_ref().expect("validated"), n, &mut rng)?;
            let u = solve_heat(&u0, spec.nu.expect("validated"), times)?;
            Ok((u0, u))
        }
        Problem::Burgers => {
            let u0 = sample_grf(spec.grf.as_ref().expect("validated"), n, &mut rng)?;
            let u = solve_burgers(&u0, spec.nu.expect("validated"), spec.solver_dt.expect("validated"), times)?;
            Ok((u0, u))
        }
        Problem::Reaction => {
            let f = sample_reaction_initial(n, &mut rng);
            let u = solve_reaction(&f, spec.rho.expect("validated"), times)?;
            Ok((f, u))
        }
        Problem::Spiral => {
            let u0 = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            Ok((u0.to_vec(), gen_spiral(u0, times)?))
        }
        Problem::Stiff => {
            let x0 = rng.uniform_in(0.1, 2.0);
            let opts = StiffOptions { mu: spec.mu.expect("validated"), ..Default::default() };
            Ok((vec![x0, 0.0], gen_stiff_vdp_with(&opts, [x0, 0.0], times)?))
        }
        Problem::Sawtooth | Problem::Square => {
            let t0 = rng.uniform_in(0.0, std::f64::consts::TAU);
            if spec.problem == Problem::Sawtooth {
                Ok((gen_sawtooth(t0, &[0.0]), gen_sawtooth(t0, times)))
            } else {
                Ok((gen_square(t0, &[0.0]), gen_square(t0, times)))
            }
        }
    }
}

/// Generates every trajectory; trajectory `i` draws from stream `(seed, i)`.
pub fn build_dataset(spec: &DatasetSpec) -> Result<TrajectoryDataset> {
    spec.validate()?;
    let times = spec.times();
    let mut trajectories = Vec::with_capacity(spec.count() * times.len() * spec.grid * spec.channels());
    let mut initial = Vec::with_capacity(spec.count() * spec.grid * spec.channels());
    for i in 0..spec.count() {
        let (u0, u) = generate_one(spec, &times, i as u64)?;
        initial.extend(u0);
        trajectories.extend(u);
    }
    let ds = TrajectoryDataset { spec: spec.clone(), times, trajectories, initial };
    ds.check()?;
    Ok(ds)
}
