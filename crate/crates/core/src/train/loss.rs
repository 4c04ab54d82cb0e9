use crate::error::Result;
use crate::scalar::Real;
use crate::spectral::Tensor;

/// Sum of squared differences, accumulated in `f64`.
pub fn sum_squared_error<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    pred.check_same_shape(target)?;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = (p - t).to_f64_lossy();
            d * d
        })
        .sum())
}

/// Mean of squared differences over all entries; zero for empty tensors.
pub fn mse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    let s = sum_squared_error(pred, target)?;
    Ok(if pred.is_empty() { 0.0 } else { s / pred.len() as f64 })
}

pub fn rmse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    Ok(mse(pred, target)?.sqrt())
}

/// Running pooled error over many tensors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PooledError {
    pub sum_sq: f64,
    pub count: usize,
}

impl PooledError {
    pub fn add<T: Real>(&mut self, pred: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
        self.sum_sq += sum_squared_error(pred, target)?;
        self.count += pred.len();
        Ok(())
    }

    pub fn mse(&self) -> f64 {
        if self.count == 0 { 0.0 } else { self.sum_sq / self.count as f64 }
    }

    pub fn rmse(&self) -> f64 {
        self.mse().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn trivial_values() {
        let a = Tensor::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = a.map(|x| x + 2.0);
        assert_eq!(mse(&b, &a).unwrap(), 4.0);
        assert_eq!(rmse(&b, &a).unwrap(), 2.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::<f64>::zeros(&[3, 2]);
        assert!(matches!(mse(&a, &b), Err(Error::Shape(_))));
    }

    fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for v in values {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    #[test]
    fn matches_compensated_summation() {
        let mut rng = crate::data::RngStream::new(5, 0);
        let a = Tensor::from_fn(&[40, 257], |_| rng.normal());
        let b = Tensor::from_fn(&[40, 257], |_| 3.0 * rng.normal());
        let oracle = kahan_sum(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y))) / a.len() as f64;
        assert!((mse(&a, &b).unwrap() - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn pooling_weights_by_entries() {
        let z1 = Tensor::<f64>::zeros(&[1]);
        let z3 = Tensor::<f64>::zeros(&[3]);
        let mut p = PooledError::default();
        p.add(&Tensor::from_vec(vec![2.0]), &z1).unwrap();
        p.add(&Tensor::from_vec(vec![0.0, 0.0, 0.0]), &z3).unwrap();
        assert_eq!(p.mse(), 1.0);
    }
}
