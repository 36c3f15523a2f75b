use crate::error::{check_dim, Error, Result};
use crate::numerics::Vector;
use crate::scalar::Scalar;

use super::field::VectorField;
use super::trajectory::check_state;

/// Default oracle resolution per network layer.
pub const DEFAULT_STEPS_PER_LAYER: usize = 64;

/// States of an ODE solution on a uniform grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution<T> {
    pub grid: Vec<T>,
    pub states: Vec<Vector<T>>,
    pub oracle_steps: usize,
}

impl<T: Scalar> OdeSolution<T> {
    pub fn final_state(&self) -> &Vector<T> {
        self.states.last().expect("solution has at least one state")
    }

    /// State at `s = n/depth`, which must lie on the grid.
    pub fn state_at_fraction(&self, n: usize, depth: usize) -> Result<&Vector<T>> {
        if depth == 0 || n > depth || !self.oracle_steps.is_multiple_of(depth) {
            return Err(Error::invalid(format!(
                "s = {n}/{depth} is not on a grid of {} steps",
                self.oracle_steps
            )));
        }
        Ok(&self.states[n * (self.oracle_steps / depth)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedScheme {
    Euler,
    Heun,
    Rk4,
}

/// Integrates `dx/ds = φ(x, s)` over `[0, 1]` with `steps` uniform steps.
///
/// Every step lies inside a single smooth piece of the field, so `steps`
/// must be a multiple of `field.segments()`.
pub fn integrate_fixed<T, V>(field: &V, x0: &[T], steps: usize, scheme: FixedScheme) -> Result<OdeSolution<T>>
where
    T: Scalar,
    V: VectorField<T> + ?Sized,
{
    let segments = field.segments();
    if steps == 0 || !steps.is_multiple_of(segments) {
        return Err(Error::invalid(format!(
            "{steps} steps do not split {segments} field segments evenly"
        )));
    }
    check_dim("ODE initial state", field.dim(), x0.len())?;
    check_state(0, x0)?;
    let per_segment = steps / segments;
    let total = T::from_count(steps);
    let h = T::one() / total;
    let half = h * T::c(0.5);
    let sixth = h / T::c(6.0);

    let mut grid = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    grid.push(T::zero());
    states.push(Vector::from_slice(x0));
    for k in 0..steps {
        let seg = k / per_segment;
        let s = T::from_count(k) / total;
        let s_next = T::from_count(k + 1) / total;
        let x = &states[k];
        let next = match scheme {
            FixedScheme::Euler => x.clone().plus_scaled(h, &field.eval_in(x, s, seg)),
            FixedScheme::Heun => {
                let a = field.eval_in(x, s, seg);
                let y = x.clone().plus_scaled(h, &a);
                let b = field.eval_in(&y, s_next, seg);
                x.clone().plus_scaled(half, &a).plus_scaled(half, &b)
            }
            FixedScheme::Rk4 => {
                let s_mid = s + half;
                let k1 = field.eval_in(x, s, seg);
                let k2 = field.eval_in(&x.clone().plus_scaled(half, &k1), s_mid, seg);
                let k3 = field.eval_in(&x.clone().plus_scaled(half, &k2), s_mid, seg);
                let k4 = field.eval_in(&x.clone().plus_scaled(h, &k3), s_next, seg);
                let two = T::c(2.0);
                let mut out = x.clone();
                for i in 0..out.dim() {
                    out[i] = out[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
                }
                out
            }
        };
        check_state(k + 1, &next)?;
        grid.push(s_next);
        states.push(next);
    }
    Ok(OdeSolution {
        grid,
        states,
        oracle_steps: steps,
    })
}

/// Classical fourth-order Runge-Kutta reference solution.
///
/// `fine_steps` must be at least four per field segment and a multiple of
/// the segment count, so every grid point `n/N` is hit exactly.
pub fn solve_ode_oracle<T, V>(field: &V, x0: &[T], fine_steps: usize) -> Result<OdeSolution<T>>
where
    T: Scalar,
    V: VectorField<T> + ?Sized,
{
    let segments = field.segments();
    if fine_steps < 4 * segments {
        return Err(Error::invalid(format!(
            "oracle needs at least {} steps, got {fine_steps}",
            4 * segments
        )));
    }
    integrate_fixed(field, x0, fine_steps, FixedScheme::Rk4)
}

/// [`solve_ode_oracle`] at [`DEFAULT_STEPS_PER_LAYER`] steps per segment.
pub fn solve_ode_default<T, V>(field: &V, x0: &[T]) -> Result<OdeSolution<T>>
where
    T: Scalar,
    V: VectorField<T> + ?Sized,
{
    solve_ode_oracle(field, x0, DEFAULT_STEPS_PER_LAYER * field.segments())
}
