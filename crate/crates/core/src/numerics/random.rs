//! Seeded sampling helpers. All randomness in the crate flows through
//! [`ChaCha8Rng`] so that a seed fixes every output bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::matrix::Matrix;
use crate::numerics::vector::{norm, Vector};
use crate::scalar::Scalar;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<T: Scalar>(rng: &mut impl Rng) -> T {
    let v: f64 = rng.sample(StandardNormal);
    T::c(v)
}

pub fn uniform<T: Scalar>(rng: &mut impl Rng, lo: f64, hi: f64) -> T {
    T::c(rng.random_range(lo..hi))
}

pub fn gaussian_vector<T: Scalar>(rng: &mut impl Rng, dim: usize) -> Vector<T> {
    Vector::from_fn(dim, |_| gaussian(rng))
}

pub fn uniform_vector<T: Scalar>(rng: &mut impl Rng, dim: usize, lo: f64, hi: f64) -> Vector<T> {
    Vector::from_fn(dim, |_| uniform(rng, lo, hi))
}

pub fn gaussian_matrix<T: Scalar>(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Uniform draw from the Euclidean ball of the given radius.
pub fn in_ball<T: Scalar>(rng: &mut impl Rng, dim: usize, radius: T) -> Vector<T> {
    let dir: Vector<T> = gaussian_vector(rng, dim);
    let u: f64 = rng.random_range(0.0..1.0);
    let r = radius * T::c(u.powf(1.0 / dim as f64));
    let n = norm(&dir);
    if n == T::zero() {
        return Vector::zeros(dim);
    }
    dir.scaled(r / n)
}

/// Uniform draw from the unit sphere.
pub fn unit_vector<T: Scalar>(rng: &mut impl Rng, dim: usize) -> Vector<T> {
    loop {
        let v: Vector<T> = gaussian_vector(rng, dim);
        let n = v.norm();
        if n > T::zero() {
            return v.scaled(T::one() / n);
        }
    }
}
