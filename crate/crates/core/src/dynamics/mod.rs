//! Euler and Heun residual chains, their continuous-depth interpolations,
//! a Runge-Kutta reference solver and approximation-error estimates.

pub mod approx;
pub mod chain;
pub mod field;
pub mod oracle;
pub mod trajectory;

pub use approx::{approximation_bound, approximation_error, estimate_c_n, ApproximationError};
pub use chain::{forward_chain, forward_euler_chain, forward_heun_chain, forward_output};
pub use field::{interpolate, locate_segment, FieldKind, FnField, InterpolatedField, VectorField};
pub use oracle::{
    integrate_fixed, solve_ode_default, solve_ode_oracle, FixedScheme, OdeSolution, DEFAULT_STEPS_PER_LAYER,
};
pub(crate) use trajectory::check_state;
pub use trajectory::{Scheme, Trajectory, DIVERGENCE_THRESHOLD};
