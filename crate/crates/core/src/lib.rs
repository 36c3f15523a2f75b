//! Depth-scaled residual networks viewed as discretisations of ODEs.
//!
//! The crate covers forward Euler and Heun chains, their continuous-depth
//! interpolations, exact and adjoint-style backpropagation, and gradient flow
//! for deep linear networks. Everything is generic over [`Scalar`] (`f32` or
//! `f64`); the aliases at the crate root pin the common `f64` case.

// `!(a < b)` is used on purpose so that NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
mod scalar;

pub mod adjoint;
pub mod dynamics;
pub mod linear_flow;
pub mod numerics;
pub mod residual;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vector64 = numerics::Vector<f64>;
pub type Vector32 = numerics::Vector<f32>;
pub type Matrix64 = numerics::Matrix<f64>;
pub type Matrix32 = numerics::Matrix<f32>;
pub type Schedule64 = residual::WeightSchedule<f64>;
pub type Schedule32 = residual::WeightSchedule<f32>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
