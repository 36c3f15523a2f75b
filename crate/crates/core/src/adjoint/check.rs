use crate::dynamics::{forward_chain, Scheme};
use crate::error::{check_dim, Result};
use crate::numerics::{finite_difference_gradient, Matrix, Vector};
use crate::residual::{ResidualFamily, WeightSchedule};
use crate::scalar::Scalar;

/// `½‖x − target‖²` and its gradient `x − target`.
pub fn quadratic_output_loss<T: Scalar>(x: &[T], target: &[T]) -> (T, Vector<T>) {
    let diff: Vector<T> = x.iter().zip(target).map(|(&a, &b)| a - b).collect();
    (T::c(0.5) * diff.dot(&diff), diff)
}

/// Central finite differences of `½‖x_N − target‖²` with respect to every
/// schedule entry, in layer order, followed by the terminal parameter when
/// the schedule has one.
pub fn finite_difference_schedule_gradient<T, F>(
    scheme: Scheme,
    family: &F,
    schedule: &WeightSchedule<T>,
    x0: &[T],
    target: &[T],
    eps: T,
) -> Result<Vector<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    check_dim("finite-difference target", family.state_dim(), target.len())?;
    let layers = schedule.flat().len();
    let mut params = schedule.flat().to_vec();
    if let Some(t) = schedule.terminal() {
        params.extend_from_slice(t);
    }
    finite_difference_gradient(
        |p: &[T]| {
            let mut s = schedule.with_flat(&p[..layers])?;
            if schedule.has_terminal() {
                s = s.with_terminal(Vector::from_slice(&p[layers..]))?;
            }
            let traj = forward_chain(scheme, family, &s, x0)?;
            Ok(quadratic_output_loss(traj.output(), target).0)
        },
        &params,
        eps,
    )
}

/// Heun one-step defect at `x` for layers `n, n + 1`.
///
/// With `φ_n(x) = ½(f_n(x) + f_{n+1}(x + f_n(x)/N))` the forward increment
/// and `ψ_n(x) = ½(f_{n+1}(x) + f_n(x − f_{n+1}(x)/N))` the backward one,
/// returns `(‖ψ_n(x + φ_n(x)/N) − φ_n(x)‖, ‖(J_{n+1} − J_n)(f_{n+1} − f_n)‖/(4N))`
/// where `J_k = ∂ₓf_k(x)`. The two agree to first order in `1/N`.
pub fn heun_step_defect<T, F>(family: &F, theta: &[T], theta_next: &[T], x: &[T], depth: usize) -> (T, T)
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let h = T::one() / T::from_count(depth);
    let half = T::c(0.5);
    let fn_x = family.eval(x, theta);
    let fn1_x = family.eval(x, theta_next);
    let phi = fn_x
        .add(&family.eval(&Vector::from_slice(x).plus_scaled(h, &fn_x), theta_next))
        .scaled(half);
    let x1 = Vector::from_slice(x).plus_scaled(h, &phi);
    let f1_x1 = family.eval(&x1, theta_next);
    let psi = f1_x1
        .add(&family.eval(&x1.clone().plus_scaled(-h, &f1_x1), theta))
        .scaled(half);
    let measured = psi.sub(&phi).norm();
    let dj: Matrix<T> = family.jac_state(x, theta_next).sub(&family.jac_state(x, theta));
    let predicted = dj.mul_vec(&fn1_x.sub(&fn_x)).norm() * h / T::c(4.0);
    (measured, predicted)
}
