use crate::error::{Error, Result};
use crate::numerics::vector::Vector;
use crate::scalar::Scalar;

/// Central-difference gradient of a scalar loss.
///
/// Component `i` is `(loss(p + eps·eᵢ) − loss(p − eps·eᵢ)) / (2·eps)`.
/// Evaluation errors from `loss` propagate; a non-finite loss value is
/// reported as [`Error::NonFinite`].
pub fn finite_difference_gradient<T, F>(mut loss: F, params: &[T], eps: T) -> Result<Vector<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    if !(eps > T::zero()) {
        return Err(Error::invalid("finite difference step must be positive"));
    }
    let mut probe = params.to_vec();
    let mut grad = Vector::zeros(params.len());
    for i in 0..params.len() {
        probe[i] = params[i] + eps;
        let up = loss(&probe)?;
        probe[i] = params[i] - eps;
        let down = loss(&probe)?;
        probe[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss evaluation while perturbing coordinate {i}"
            )));
        }
        grad[i] = (up - down) / (T::c(2.0) * eps);
    }
    Ok(grad)
}

/// Relative error `‖a − b‖ / max(‖b‖, floor)`.
pub fn relative_error<T: Scalar>(approx: &[T], exact: &[T], floor: T) -> T {
    let diff: Vec<T> = approx.iter().zip(exact).map(|(&a, &b)| a - b).collect();
    crate::numerics::vector::norm(&diff) / crate::numerics::vector::norm(exact).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let g = finite_difference_gradient(|p: &[f64]| Ok(p.iter().map(|v| v * v).sum()), &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9);
        assert!((g[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn linear_is_exact_up_to_rounding() {
        let a = [0.5, -3.0, 7.25];
        let g = finite_difference_gradient(
            |p: &[f64]| Ok(p.iter().zip(&a).map(|(x, y)| x * y).sum()),
            &[0.1, 0.2, -0.3],
            1e-3,
        )
        .unwrap();
        for (gi, ai) in g.iter().zip(&a) {
            assert!((gi - ai).abs() < 1e-11);
        }
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let r = finite_difference_gradient(
            |p: &[f64]| Ok(if p[0] > 0.0 { f64::INFINITY } else { 0.0 }),
            &[0.0],
            1e-3,
        );
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn evaluation_errors_propagate() {
        let r = finite_difference_gradient(
            |_: &[f64]| Err(Error::Divergence { layer: 3, norm: 1e13 }),
            &[0.0],
            1e-3,
        );
        assert!(matches!(r, Err(Error::Divergence { layer: 3, .. })));
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(finite_difference_gradient(|_: &[f64]| Ok(0.0), &[1.0], 0.0).is_err());
    }
}
