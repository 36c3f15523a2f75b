use crate::numerics::{Matrix, Vector};
use crate::scalar::Scalar;

/// A residual function `f(x, θ)` together with its exact vector-Jacobian
/// products in the state `x` and the flat parameter vector `θ`.
///
/// Implementations are pure: repeated calls with equal arguments return equal
/// results, and no call retains references to its inputs.
pub trait ResidualFamily<T: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;

    fn state_dim(&self) -> usize;

    fn param_dim(&self) -> usize;

    fn eval(&self, x: &[T], theta: &[T]) -> Vector<T>;

    /// `[∂ₓf(x, θ)]ᵀ v`
    fn vjp_state(&self, x: &[T], theta: &[T], v: &[T]) -> Vector<T>;

    /// `[∂_θ f(x, θ)]ᵀ v`
    fn vjp_params(&self, x: &[T], theta: &[T], v: &[T]) -> Vector<T>;

    /// `∂ₓf(x, θ)` as a `d × d` matrix; row `i` is the gradient of `fᵢ`.
    fn jac_state(&self, x: &[T], theta: &[T]) -> Matrix<T> {
        let d = self.state_dim();
        let mut jac = Matrix::zeros(d, d);
        let mut e = vec![T::zero(); d];
        for i in 0..d {
            e[i] = T::one();
            let row = self.vjp_state(x, theta, &e);
            for (j, &v) in row.iter().enumerate() {
                jac.set(i, j, v);
            }
            e[i] = T::zero();
        }
        jac
    }

    /// `∂_θ f(x, θ)` as a `d × p` matrix, assembled from `d` parameter VJPs.
    fn jac_params(&self, x: &[T], theta: &[T]) -> Matrix<T> {
        let d = self.state_dim();
        let p = self.param_dim();
        let mut jac = Matrix::zeros(d, p);
        let mut e = vec![T::zero(); d];
        for i in 0..d {
            e[i] = T::one();
            let row = self.vjp_params(x, theta, &e);
            for (j, &v) in row.iter().enumerate() {
                jac.set(i, j, v);
            }
            e[i] = T::zero();
        }
        jac
    }
}

impl<T: Scalar, F: ResidualFamily<T> + ?Sized> ResidualFamily<T> for Box<F> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn eval(&self, x: &[T], theta: &[T]) -> Vector<T> {
        (**self).eval(x, theta)
    }
    fn vjp_state(&self, x: &[T], theta: &[T], v: &[T]) -> Vector<T> {
        (**self).vjp_state(x, theta, v)
    }
    fn vjp_params(&self, x: &[T], theta: &[T], v: &[T]) -> Vector<T> {
        (**self).vjp_params(x, theta, v)
    }
    fn jac_state(&self, x: &[T], theta: &[T]) -> Matrix<T> {
        (**self).jac_state(x, theta)
    }
    fn jac_params(&self, x: &[T], theta: &[T]) -> Matrix<T> {
        (**self).jac_params(x, theta)
    }
}
