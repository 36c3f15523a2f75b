//! Dense linear algebra, norms, seeded randomness, finite-difference oracles
//! and log-log slope fitting.

pub mod finite_diff;
pub mod fit;
pub mod matrix;
pub mod random;
pub mod vector;

pub use finite_diff::{finite_difference_gradient, relative_error};
pub use fit::{drop_floor_points, fit_loglog_slope, noise_floor, SlopeFit};
pub use matrix::Matrix;
pub use vector::{axpy, distance, dot, norm, Vector};
