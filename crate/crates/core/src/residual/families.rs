//! Built-in residual families.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::residual::family::ResidualFamily;
use crate::scalar::Scalar;

/// `f(x, θ) = θ·x` with `θ` a row-major `d × d` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearFamily {
    d: usize,
}

pub fn make_linear_family(d: usize) -> Result<LinearFamily> {
    if d == 0 {
        return Err(Error::invalid("linear family needs d >= 1"));
    }
    Ok(LinearFamily { d })
}

impl LinearFamily {
    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn param_dim(&self) -> usize {
        self.d * self.d
    }
}

impl<T: Scalar> ResidualFamily<T> for LinearFamily {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn state_dim(&self) -> usize {
        LinearFamily::state_dim(self)
    }
    fn param_dim(&self) -> usize {
        LinearFamily::param_dim(self)
    }
    fn eval(&self, x: &[T], theta: &[T]) -> Vector<T> {
        let d = self.d;
        Vector::from_fn(d, |i| crate::numerics::dot(&theta[i * d..(i + 1) * d], x))
    }
    fn vjp_state(&self, _x: &[T], theta: &[T], v: &[T]) -> Vector<T> {
        let d = self.d;
        let mut out = Vector::zeros(d);
        for (i, &vi) in v.iter().enumerate() {
            for j in 0..d {
                out[j] = out[j] + theta[i * d + j] * vi;
            }
        }
        out
    }
    fn vjp_params(&self, x: &[T], _theta: &[T], v: &[T]) -> Vector<T> {
        let d = self.d;
        Vector::from_fn(d * d, |k| v[k / d] * x[k % d])
    }
    fn jac_state(&self, _x: &[T], theta: &[T]) -> Matrix<T> {
        Matrix::from_row_major(self.d, self.d, theta.to_vec()).expect("param_dim = d²")
    }
}

/// `f(x, (W₁, W₂)) = W₂·tanh(W₁·x)`.
///
/// Parameters are laid out as `W₁` (`hidden × d`, row-major) followed by
/// `W₂` (`d × hidden`, row-major).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpFamily {
    d: usize,
    hidden: usize,
}

pub fn make_mlp_family(d: usize, hidden: usize) -> Result<MlpFamily> {
    if d == 0 || hidden == 0 {
        return Err(Error::invalid("mlp family needs d >= 1 and hidden >= 1"));
    }
    Ok(MlpFamily { d, hidden })
}

impl MlpFamily {
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Offset of `W₂` inside the flat parameter vector.
    pub fn w2_offset(&self) -> usize {
        self.d * self.hidden
    }

    fn activations<T: Scalar>(&self, x: &[T], theta: &[T]) -> Vec<T> {
        let d = self.d;
        (0..self.hidden)
            .map(|k| crate::numerics::dot(&theta[k * d..(k + 1) * d], x).tanh())
            .collect()
    }

    /// `diag(1 − tanh²)·W₂ᵀ·v`, the gradient at the pre-activations.
    fn backprop_hidden<T: Scalar>(&self, h: &[T], theta: &[T], v: &[T]) -> Vec<T> {
        let w2 = &theta[self.w2_offset()..];
        (0..self.hidden)
            .map(|k| {
                let s: T = (0..self.d).map(|i| w2[i * self.hidden + k] * v[i]).sum();
                s * (T::one() - h[k] * h[k])
            })
            .collect()
    }
}

impl MlpFamily {
    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn param_dim(&self) -> usize {
        2 * self.d * self.hidden
    }
}

impl<T: Scalar> ResidualFamily<T> for MlpFamily {
    fn name(&self) -> &'static str {
        "mlp"
    }
    fn state_dim(&self) -> usize {
        MlpFamily::state_dim(self)
    }
    fn param_dim(&self) -> usize {
        MlpFamily::param_dim(self)
    }
    fn eval(&self, x: &[T], theta: &[T]) -> Vector<T> {
        let h = self.activations(x, theta);
        let w2 = &theta[self.w2_offset()..];
        Vector::from_fn(self.d, |i| {
            crate::numerics::dot(&w2[i * self.hidden..(i + 1) * self.hidden], &h)
        })
    }
    fn vjp_state(&self, x: &[T], theta: &[T], v: &[T]) -> Vector<T> {
        let h = self.activations(x, theta);
        let gz = self.backprop_hidden(&h, theta, v);
        let d = self.d;
        let mut out = Vector::zeros(d);
        for (k, &g) in gz.iter().enumerate() {
            for j in 0..d {
                out[j] = out[j] + theta[k * d + j] * g;
            }
        }
        out
    }
    fn vjp_params(&self, x: &[T], theta: &[T], v: &[T]) -> Vector<T> {
        let h = self.activations(x, theta);
        let gz = self.backprop_hidden(&h, theta, v);
        let (d, hid) = (self.d, self.hidden);
        let mut out = Vector::zeros(2 * d * hid);
        for k in 0..hid {
            for j in 0..d {
                out[k * d + j] = gz[k] * x[j];
            }
        }
        let off = self.w2_offset();
        for i in 0..d {
            for k in 0..hid {
                out[off + i * hid + k] = v[i] * h[k];
            }
        }
        out
    }
    fn jac_state(&self, x: &[T], theta: &[T]) -> Matrix<T> {
        let h = self.activations(x, theta);
        let (d, hid) = (self.d, self.hidden);
        let w2 = &theta[self.w2_offset()..];
        Matrix::from_fn(d, d, |i, j| {
            (0..hid)
                .map(|k| w2[i * hid + k] * (T::one() - h[k] * h[k]) * theta[k * d + j])
                .sum()
        })
    }
}

/// Scalar, state-independent `f(x, θ) = θ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SquareFamily;

pub fn make_square_family() -> SquareFamily {
    SquareFamily
}

impl SquareFamily {
    pub fn state_dim(&self) -> usize {
        1
    }

    pub fn param_dim(&self) -> usize {
        1
    }
}

impl<T: Scalar> ResidualFamily<T> for SquareFamily {
    fn name(&self) -> &'static str {
        "square"
    }
    fn state_dim(&self) -> usize {
        SquareFamily::state_dim(self)
    }
    fn param_dim(&self) -> usize {
        SquareFamily::param_dim(self)
    }
    fn eval(&self, _x: &[T], theta: &[T]) -> Vector<T> {
        Vector::from(vec![theta[0] * theta[0]])
    }
    fn vjp_state(&self, _x: &[T], _theta: &[T], _v: &[T]) -> Vector<T> {
        Vector::zeros(1)
    }
    fn vjp_params(&self, _x: &[T], theta: &[T], v: &[T]) -> Vector<T> {
        Vector::from(vec![T::c(2.0) * theta[0] * v[0]])
    }
}

/// State-independent `f(x, θ) = θ` with `θ ∈ R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OffsetFamily {
    d: usize,
}

pub fn make_offset_family(d: usize) -> Result<OffsetFamily> {
    if d == 0 {
        return Err(Error::invalid("offset family needs d >= 1"));
    }
    Ok(OffsetFamily { d })
}

impl OffsetFamily {
    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn param_dim(&self) -> usize {
        self.d
    }
}

impl<T: Scalar> ResidualFamily<T> for OffsetFamily {
    fn name(&self) -> &'static str {
        "offset"
    }
    fn state_dim(&self) -> usize {
        OffsetFamily::state_dim(self)
    }
    fn param_dim(&self) -> usize {
        OffsetFamily::param_dim(self)
    }
    fn eval(&self, _x: &[T], theta: &[T]) -> Vector<T> {
        Vector::from_slice(theta)
    }
    fn vjp_state(&self, _x: &[T], _theta: &[T], _v: &[T]) -> Vector<T> {
        Vector::zeros(self.d)
    }
    fn vjp_params(&self, _x: &[T], _theta: &[T], v: &[T]) -> Vector<T> {
        Vector::from_slice(v)
    }
}

/// `f ≡ 0`, with an arbitrary (ignored) parameter dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroFamily {
    d: usize,
    p: usize,
}

pub fn make_zero_family(d: usize, param_dim: usize) -> Result<ZeroFamily> {
    if d == 0 {
        return Err(Error::invalid("zero family needs d >= 1"));
    }
    Ok(ZeroFamily { d, p: param_dim })
}

impl ZeroFamily {
    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn param_dim(&self) -> usize {
        self.p
    }
}

impl<T: Scalar> ResidualFamily<T> for ZeroFamily {
    fn name(&self) -> &'static str {
        "zero"
    }
    fn state_dim(&self) -> usize {
        ZeroFamily::state_dim(self)
    }
    fn param_dim(&self) -> usize {
        ZeroFamily::param_dim(self)
    }
    fn eval(&self, _x: &[T], _theta: &[T]) -> Vector<T> {
        Vector::zeros(self.d)
    }
    fn vjp_state(&self, _x: &[T], _theta: &[T], _v: &[T]) -> Vector<T> {
        Vector::zeros(self.d)
    }
    fn vjp_params(&self, _x: &[T], _theta: &[T], _v: &[T]) -> Vector<T> {
        Vector::zeros(self.p)
    }
}
