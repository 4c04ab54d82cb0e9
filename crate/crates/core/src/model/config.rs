use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Activation;

/// Shape hyperparameters of a continuous-time Fourier neural operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtfnoConfig {
    /// Number of Fourier layers.
    pub layers: usize,
    /// Retained Fourier modes (`0..modes`).
    pub modes: usize,
    /// Hidden channel width.
    pub width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Output size of the shared time encoders.
    pub time_hidden: usize,
    /// Number of sinusoidal frequencies in the time embedding.
    pub time_sinusoid: usize,
    #[serde(default = "one")]
    pub heads: usize,
    /// Zero cells appended to the spatial axis after lifting.
    #[serde(default)]
    pub padding: usize,
    /// Row `L1` bound for weights and kernels; `None` disables stabilization.
    #[serde(default)]
    pub stabilization: Option<f64>,
    #[serde(default)]
    pub activation: Activation,
}

fn one() -> usize {
    1
}

impl CtfnoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("layers", self.layers),
            ("modes", self.modes),
            ("width", self.width),
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
            ("time_hidden", self.time_hidden),
            ("time_sinusoid", self.time_sinusoid),
            ("heads", self.heads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.width % self.heads != 0 {
            return Err(Error::config(format!(
                "width {} is not divisible by {} heads",
                self.width, self.heads
            )));
        }
        if let Some(m) = self.stabilization {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::config(format!("stabilization bound must be positive, got {m}")));
            }
        }
        Ok(())
    }

    pub fn head_width(&self) -> usize {
        self.width / self.heads
    }

    /// Checks that a spatial grid can carry the retained modes.
    pub fn check_grid(&self, grid: usize) -> Result<()> {
        let padded = grid + self.padding;
        if padded < 2 * self.modes {
            return Err(Error::config(format!(
                "grid {grid} + padding {} is smaller than 2 x {} modes",
                self.padding, self.modes
            )));
        }
        Ok(())
    }

    /// Closed-form count of real learnable scalars (complex entries count twice).
    pub fn param_count(&self) -> usize {
        let (dv, c, k) = (self.width, self.time_hidden, self.modes);
        let encoder = c * 2 * self.time_sinusoid + c + c * c + c;
        let layer = dv * dv + dv + 2 * k * dv * dv + 2 * self.heads * k * c + dv * c;
        2 * encoder + dv * self.in_channels + self.out_channels * dv + self.layers * layer
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CtfnoParams;

    fn base() -> CtfnoConfig {
        CtfnoConfig {
            layers: 2,
            modes: 8,
            width: 16,
            in_channels: 1,
            out_channels: 1,
            time_hidden: 8,
            time_sinusoid: 4,
            heads: 2,
            padding: 0,
            stabilization: None,
            activation: Activation::Gelu,
        }
    }

    #[test]
    fn validation() {
        assert!(base().validate().is_ok());
        let mut c = base();
        c.heads = 3;
        assert!(c.validate().is_err());
        let mut c = base();
        c.stabilization = Some(0.0);
        assert!(c.validate().is_err());
        let mut c = base();
        c.layers = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn grid_must_hold_modes() {
        let c = base();
        assert!(c.check_grid(16).is_ok());
        assert!(c.check_grid(15).is_err());
        let mut p = base();
        p.padding = 2;
        assert!(p.check_grid(14).is_ok());
    }

    #[test]
    fn toml_round_trip_with_defaults() {
        let text = "layers = 2\nmodes = 4\nwidth = 8\nin_channels = 1\nout_channels = 1\n\
                    time_hidden = 4\ntime_sinusoid = 2\nactivation = \"silu\"\n";
        let c: CtfnoConfig = toml::from_str(text).unwrap();
        assert_eq!(c.heads, 1);
        assert_eq!(c.padding, 0);
        assert_eq!(c.stabilization, None);
        assert_eq!(c.activation, Activation::Silu);
        let back: CtfnoConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn low_config_count() {
        let low = CtfnoConfig { layers: 3, modes: 4, width: 16, time_hidden: 32, time_sinusoid: 16, heads: 1, ..base() };
        // encoders 2 x 2112, layers 3 x 3088, lift and projection 32
        assert_eq!(low.param_count(), 13_520);
        assert_eq!(CtfnoParams::<f64>::init(&low, 0).unwrap().flatten().len(), 13_520);
    }
}
