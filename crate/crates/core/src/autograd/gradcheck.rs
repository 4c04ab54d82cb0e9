use super::tape::{Slot, Tape};
use super::value::Value;
use crate::error::Result;
use crate::scalar::Real;

/// Comparison of analytic and central-difference gradients for one parameter.
#[derive(Debug, Clone)]
pub struct GroupCheck {
    pub index: usize,
    pub max_abs_diff: f64,
    /// Largest analytic or numeric gradient magnitude in the group.
    pub scale: f64,
    /// `max_abs_diff / scale` (or the absolute difference for an all-zero group).
    pub rel_error: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    pub max_rel_error: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| !g.flagged)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &GroupCheck> {
        self.groups.iter().filter(|g| g.flagged)
    }
}

/// Checks the tape's adjoints for `build` against central differences.
///
/// `build` receives a fresh tape with every entry of `params` recorded as a
/// parameter (in order) and must return a scalar loss slot. Errors are
/// measured per parameter group relative to that group's largest gradient
/// entry; complex parameters are perturbed in their real and imaginary parts
/// separately.
pub fn grad_check<T, F>(build: F, params: &[Value<T>], h: T, tol: f64) -> Result<GradCheckReport>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Slot]) -> Result<Slot>,
{
    let eval = |vals: &[Value<T>]| -> Result<T> {
        let mut tape = Tape::new();
        let slots: Vec<Slot> = vals.iter().map(|v| tape.param(v.clone())).collect();
        let loss = build(&mut tape, &slots)?;
        tape.real(loss)?.item()
    };

    let mut tape = Tape::new();
    let slots: Vec<Slot> = params.iter().map(|v| tape.param(v.clone())).collect();
    let loss = build(&mut tape, &slots)?;
    let grads = tape.backward(loss)?;

    let mut work: Vec<Value<T>> = params.to_vec();
    let mut groups = Vec::with_capacity(params.len());
    let two_h = h + h;
    for (pi, slot) in slots.iter().enumerate() {
        let analytic: Vec<T> = grads.get(*slot).expect("parameter adjoint").flat().to_vec();
        let mut max_diff = 0.0f64;
        let mut scale = 0.0f64;
        for e in 0..analytic.len() {
            let orig = work[pi].flat()[e];
            work[pi].flat_mut()[e] = orig + h;
            let up = eval(&work)?;
            work[pi].flat_mut()[e] = orig - h;
            let down = eval(&work)?;
            work[pi].flat_mut()[e] = orig;
            let numeric = ((up - down) / two_h).to_f64_lossy();
            let a = analytic[e].to_f64_lossy();
            max_diff = max_diff.max((a - numeric).abs());
            scale = scale.max(a.abs()).max(numeric.abs());
        }
        let rel_error = if scale > 0.0 { max_diff / scale } else { max_diff };
        groups.push(GroupCheck {
            index: pi,
            max_abs_diff: max_diff,
            scale,
            rel_error,
            flagged: !(rel_error <= tol),
        });
    }
    let max_rel_error = groups.iter().map(|g| g.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { groups, max_rel_error, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let x = Value::Real(Tensor::from_vec(vec![0.3, -1.2, 2.5]));
        let w = Value::Real(Tensor::new(vec![2, 3], vec![1.0, -0.5, 0.25, 2.0, 0.0, -1.0]).unwrap());
        let report = grad_check(
            |t, p| {
                let y = t.matmul(p[1], p[0])?;
                t.sum_squares(y)
            },
            &[x, w],
            1e-3,
            1e-9,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert!(report.passed());
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        // Clamp has a kink at |x| = 1: straddling it makes the difference quotient disagree.
        let x = Value::Real(Tensor::from_vec(vec![1.0, 0.2]));
        let report = grad_check(
            |t, p| {
                let y = t.clamp_unit(p[0])?;
                t.sum(y)
            },
            &[x],
            1e-4,
            1e-6,
        )
        .unwrap();
        assert!(!report.passed());
        assert_eq!(report.flagged().count(), 1);
    }
}
