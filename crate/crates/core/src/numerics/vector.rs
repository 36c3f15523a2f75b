use std::ops::{Deref, DerefMut};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Dense real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            data: vec![T::zero(); dim],
        }
    }

    pub fn filled(dim: usize, value: T) -> Self {
        Self { data: vec![value; dim] }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> T) -> Self {
        Self {
            data: (0..dim).map(f).collect(),
        }
    }

    pub fn from_slice(values: &[T]) -> Self {
        Self { data: values.to_vec() }
    }

    /// Builds from `f64` literals, converting to the scalar type.
    pub fn from_f64(values: &[f64]) -> Self {
        Self {
            data: values.iter().map(|&v| T::c(v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn norm(&self) -> T {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            data: self.data.iter().map(|&v| a * v).collect(),
        }
    }

    /// `self + a·x`, consuming `self`.
    pub fn plus_scaled(mut self, a: T, x: &[T]) -> Self {
        axpy(&mut self.data, a, x);
        self
    }

    pub fn sub(&self, other: &[T]) -> Self {
        debug_assert_eq!(self.dim(), other.len());
        Self {
            data: self.data.iter().zip(other).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &[T]) -> Self {
        debug_assert_eq!(self.dim(), other.len());
        Self {
            data: self.data.iter().zip(other).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn dot(&self, other: &[T]) -> T {
        dot(&self.data, other)
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn ensure_dim(&self, context: &'static str, expected: usize) -> Result<()> {
        check_dim(context, expected, self.dim())
    }
}

impl<T> From<Vec<T>> for Vector<T> {
    fn from(data: Vec<T>) -> Self {
        Self { data }
    }
}

impl<T> Deref for Vector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.data
    }
}

impl<T> DerefMut for Vector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl<T: Scalar> FromIterator<T> for Vector<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self {
            data: iter.into_iter().collect(),
        }
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Euclidean norm, scaled to avoid overflow for large entries.
pub fn norm<T: Scalar>(a: &[T]) -> T {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let ss = a.iter().fold(T::zero(), |acc, &v| {
        let r = v / scale;
        acc + r * r
    });
    scale * ss.sqrt()
}

/// `y ← y + a·x`
pub fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

pub fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let diff: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    norm(&diff)
}
