use std::fmt;

use crate::error::{check_dim, Error, Result};
use crate::numerics::vector::{dot, norm, Vector};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

const POWER_MAX_ITERS: usize = 10_000;
const POWER_REL_TOL: f64 = 1e-12;

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Wraps row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_dim("Matrix::from_row_major", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim("Matrix::from_rows", c, row.len())?;
            data.extend(row.iter().map(|&v| T::c(v)));
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    /// `A·x`
    pub fn mul_vec(&self, x: &[T]) -> Vector<T> {
        assert_eq!(self.cols, x.len(), "mul_vec shape mismatch");
        Vector::from_fn(self.rows, |i| dot(self.row(i), x))
    }

    /// `Aᵀ·v`
    pub fn tr_mul_vec(&self, v: &[T]) -> Vector<T> {
        assert_eq!(self.rows, v.len(), "tr_mul_vec shape mismatch");
        let mut out = Vector::zeros(self.cols);
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// `I + s·A` for square `A`.
    pub fn identity_plus_scaled(&self, s: T) -> Self {
        debug_assert!(self.is_square());
        let mut out = self.scale(s);
        for i in 0..self.rows {
            out.data[i * self.cols + i] = out.data[i * self.cols + i] + T::one();
        }
        out
    }

    fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        norm(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Largest singular value, by power iteration on `AᵀA`.
    ///
    /// Starts from the normalized all-ones vector. A second deterministic
    /// start (an alternating ramp) is also run and the larger estimate kept,
    /// so that a start vector orthogonal to the dominant singular direction
    /// cannot hide it.
    pub fn spectral_norm(&self) -> Result<T> {
        if self.data.is_empty() {
            return Err(Error::invalid("spectral_norm of an empty matrix"));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("spectral_norm input".into()));
        }
        let n = self.cols;
        let ones = Vector::filled(n, T::one());
        let ramp = Vector::from_fn(n, |i| {
            let v = T::from_count(i + 1);
            if i % 2 == 0 {
                v
            } else {
                -v
            }
        });
        let a = self.power_ata(ones);
        let b = if n > 1 { self.power_ata(ramp) } else { a };
        Ok(a.max(b).sqrt())
    }

    /// Dominant eigenvalue of `AᵀA` from the given start.
    fn power_ata(&self, start: Vector<T>) -> T {
        let tol = T::tol(POWER_REL_TOL);
        let mut v = start;
        let n0 = v.norm();
        for x in v.iter_mut() {
            *x = *x / n0;
        }
        let mut lambda = T::zero();
        for _ in 0..POWER_MAX_ITERS {
            let w = self.tr_mul_vec(&self.mul_vec(&v));
            let next = dot(&v, &w);
            let wn = w.norm();
            if wn == T::zero() {
                return T::zero();
            }
            v = w.scaled(T::one() / wn);
            let done = (next - lambda).abs() <= tol * next.abs();
            lambda = next;
            if done {
                break;
            }
        }
        lambda
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<T>> {
        if !self.is_square() {
            return Err(Error::invalid("symmetric_eigenvalues needs a square matrix"));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("symmetric_eigenvalues input".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let scale = self.frobenius_norm().max(T::min_positive_value());
        for _sweep in 0..100 {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j) * a.get(i, j))
                .sum();
            if off.sqrt() <= T::epsilon() * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (T::c(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut eig: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        Ok(eig)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

impl<T: Scalar> fmt::Display for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:.6}")).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}
