use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::scalar::Real;

/// Pointwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `x * Phi(x)` with the exact Gaussian CDF.
    #[default]
    Gelu,
    /// `x * sigmoid(x)`.
    Silu,
    Identity,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Gelu => x * gauss_cdf(x),
            Activation::Silu => x * sigmoid(x),
            Activation::Identity => x,
        }
    }

    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Gelu => gauss_cdf(x) + x * gauss_pdf(x),
            Activation::Silu => {
                let s = sigmoid(x);
                s * (T::one() + x * (T::one() - s))
            }
            Activation::Identity => T::one(),
        }
    }

    /// `(apply(x), derivative(x))` sharing the expensive transcendental.
    pub fn apply_with_derivative<T: Real>(self, x: T) -> (T, T) {
        match self {
            Activation::Gelu => {
                let cdf = gauss_cdf(x);
                (x * cdf, cdf + x * gauss_pdf(x))
            }
            Activation::Silu => {
                let s = sigmoid(x);
                (x * s, s * (T::one() + x * (T::one() - s)))
            }
            Activation::Identity => (x, T::one()),
        }
    }

    /// Upper bound on the Lipschitz constant used by the stability bounds.
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Gelu => 1.1290,
            Activation::Silu => 1.1,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Gelu => "gelu",
            Activation::Silu => "silu",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gelu" => Ok(Activation::Gelu),
            "silu" => Ok(Activation::Silu),
            "identity" => Ok(Activation::Identity),
            other => Err(format!("unknown activation '{other}'")),
        }
    }
}

pub fn gauss_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (T::one() + (x * T::FRAC_1_SQRT_2()).erf())
}

pub fn gauss_pdf<T: Real>(x: T) -> T {
    // 1 / sqrt(2 pi)
    T::lit(0.398_942_280_401_432_7) * (-(x * x) * T::lit(0.5)).exp()
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn activation<T: Real>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    x.map(|v| kind.apply(v))
}

pub fn activation_grad<T: Real>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    x.map(|v| kind.derivative(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin_and_asymptote() {
        assert_eq!(Activation::Gelu.apply(0.0f64), 0.0);
        assert_eq!(Activation::Silu.apply(0.0f64), 0.0);
        assert!((Activation::Gelu.apply(10.0f64) - 10.0).abs() < 1e-6);
        assert_eq!(Activation::Identity.apply(-3.5f64), -3.5);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        let mut s = 12345u64;
        for _ in 0..100 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let x = ((s >> 11) as f64 / (1u64 << 53) as f64) * 12.0 - 6.0;
            for kind in [Activation::Gelu, Activation::Silu, Activation::Identity] {
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                assert!((fd - kind.derivative(x)).abs() < 1e-7, "{kind:?} at {x}");
            }
        }
    }

    #[test]
    fn lipschitz_bounds_hold_on_a_grid() {
        for kind in [Activation::Gelu, Activation::Silu, Activation::Identity] {
            let worst = (-4000..=4000)
                .map(|i| kind.derivative(i as f64 * 0.005).abs())
                .fold(0.0, f64::max);
            assert!(worst <= kind.lipschitz(), "{kind:?}: {worst}");
        }
    }

    #[test]
    fn sigmoid_is_stable_for_large_arguments() {
        assert_eq!(sigmoid(-800.0f64), 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
    }

    #[test]
    fn tensor_helpers() {
        let x = Tensor::from_vec(vec![-1.0f64, 0.0, 2.0]);
        let y = activation(&x, Activation::Identity);
        assert_eq!(y, x);
        let g = activation_grad(&x, Activation::Identity);
        assert_eq!(g.data(), &[1.0, 1.0, 1.0]);
    }
}
