use crate::dynamics::{check_state, Scheme, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{axpy, Vector};
use crate::residual::{ResidualFamily, WeightSchedule};
use crate::scalar::Scalar;

use super::gradients::{Collector, GradientSet, GradientSink};
use super::reconstruct::{euler_inverse_step, heun_inverse_step};

/// Pulls `g = ∇_{x_{n+1}} L` back through `x_{n+1} = x_n + h f(x_n, θ_n)`,
/// returning `(∇_{θ_n} L, ∇_{x_n} L)`.
#[inline]
fn euler_backward_step<T, F>(family: &F, theta: &[T], x: &[T], g: &[T], h: T) -> (Vector<T>, Vector<T>)
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let pg = family.vjp_params(x, theta, g).scaled(h);
    let mut gx = Vector::from_slice(g);
    axpy(&mut gx, h, &family.vjp_state(x, theta, g));
    (pg, gx)
}

/// Pulls `g = ∇_{x_{n+1}} L` back through one Heun step with midpoint `y`,
/// returning the contributions to `∇_{θ_n} L` and `∇_{θ_{n+1}} L`, and
/// `∇_{x_n} L`.
#[inline]
fn heun_backward_step<T, F>(
    family: &F,
    theta: &[T],
    theta_next: &[T],
    x: &[T],
    y: &[T],
    g: &[T],
    h: T,
) -> (Vector<T>, Vector<T>, Vector<T>)
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let half = h * T::c(0.5);
    let gb = Vector::from_slice(g).scaled(half);
    let grad_next = family.vjp_params(y, theta_next, &gb);
    let gy = family.vjp_state(y, theta_next, &gb);
    let ga = gb.plus_scaled(h, &gy);
    let grad = family.vjp_params(x, theta, &ga);
    let mut gx = Vector::from_slice(g);
    axpy(&mut gx, T::one(), &gy);
    axpy(&mut gx, T::one(), &family.vjp_state(x, theta, &ga));
    (grad, grad_next, gx)
}

fn check_sweep<T, F>(family: &F, schedule: &WeightSchedule<T>, x_final: &[T], output_grad: &[T]) -> Result<()>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    check_dim("sweep state", family.state_dim(), x_final.len())?;
    check_dim("output gradient", family.state_dim(), output_grad.len())?;
    check_dim("sweep parameters", family.param_dim(), schedule.param_dim())?;
    if output_grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("output gradient".into()));
    }
    Ok(())
}

/// Reverse Euler sweep. `state_at(n)` supplies `x_n` for `n = N−1, …, 0`.
fn euler_sweep<T, F, S>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    output_grad: &[T],
    mut state_at: impl FnMut(usize, &Vector<T>) -> Result<Vector<T>>,
    sink: &mut S,
) -> Result<()>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
    S: GradientSink<T> + ?Sized,
{
    check_sweep(family, schedule, x_final, output_grad)?;
    let depth = schedule.depth();
    let h = T::one() / T::from_count(depth);
    let mut x = Vector::from_slice(x_final);
    let mut g = Vector::from_slice(output_grad);
    sink.state_grad(depth, &x, &g);
    for n in (0..depth).rev() {
        x = state_at(n, &x)?;
        let (pg, gx) = euler_backward_step(family, schedule.layer(n), &x, &g, h);
        g = gx;
        sink.param_grad(n, &pg);
        sink.state_grad(n, &x, &g);
    }
    Ok(())
}

/// Reverse Heun sweep. `state_at(n)` supplies `(x_n, y_n)` for
/// `n = N−1, …, 0`, where `y_n` is the forward midpoint.
///
/// Layer `n + 1` receives gradient from steps `n + 1` and `n`, so one
/// partial layer gradient is carried between iterations.
fn heun_sweep<T, F, S>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    output_grad: &[T],
    mut state_at: impl FnMut(usize, &Vector<T>) -> Result<(Vector<T>, Vector<T>)>,
    sink: &mut S,
) -> Result<()>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
    S: GradientSink<T> + ?Sized,
{
    check_sweep(family, schedule, x_final, output_grad)?;
    let depth = schedule.depth();
    let h = T::one() / T::from_count(depth);
    let mut x = Vector::from_slice(x_final);
    let mut g = Vector::from_slice(output_grad);
    sink.state_grad(depth, &x, &g);
    let mut pending: Option<Vector<T>> = None;
    for n in (0..depth).rev() {
        let (xn, y) = state_at(n, &x)?;
        x = xn;
        let (grad, grad_next, gx) =
            heun_backward_step(family, schedule.layer(n), schedule.extended(n + 1), &x, &y, &g, h);
        g = gx;
        match pending.take() {
            Some(mut done) => {
                axpy(&mut done, T::one(), &grad_next);
                sink.param_grad(n + 1, &done);
                pending = Some(grad);
            }
            None if schedule.has_terminal() => {
                sink.terminal_grad(&grad_next);
                pending = Some(grad);
            }
            None => pending = Some(grad.plus_scaled(T::one(), &grad_next)),
        }
        sink.state_grad(n, &x, &g);
    }
    sink.param_grad(0, &pending.expect("depth >= 1"));
    Ok(())
}

fn stored_trajectory<'t, T: Scalar>(
    schedule: &WeightSchedule<T>,
    traj: &'t Trajectory<T>,
    scheme: Scheme,
) -> Result<&'t Trajectory<T>> {
    if traj.scheme != scheme {
        return Err(Error::invalid(format!(
            "expected a {} trajectory, got {}",
            scheme.as_str(),
            traj.scheme.as_str()
        )));
    }
    check_dim("trajectory depth", schedule.depth(), traj.depth())?;
    Ok(traj)
}

/// Exact reverse-mode gradients of an Euler chain from its stored nodes.
pub fn backprop_exact<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    traj: &Trajectory<T>,
    output_grad: &[T],
) -> Result<GradientSet<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let traj = stored_trajectory(schedule, traj, Scheme::Euler)?;
    let mut out = Collector::new(schedule.depth());
    euler_sweep(
        family,
        schedule,
        traj.output(),
        output_grad,
        |n, _| Ok(traj.nodes[n].clone()),
        &mut out,
    )?;
    Ok(out.finish())
}

/// Exact reverse-mode gradients of a Heun chain from its stored nodes and
/// midpoints.
///
/// With an explicit terminal parameter its gradient is reported in
/// [`GradientSet::terminal_grad`]; otherwise `θ_N = θ_{N−1}` and the
/// contribution lands on the last layer.
pub fn backprop_exact_heun<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    traj: &Trajectory<T>,
    output_grad: &[T],
) -> Result<GradientSet<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let traj = stored_trajectory(schedule, traj, Scheme::Heun)?;
    let mids = traj
        .midpoints
        .as_ref()
        .ok_or_else(|| Error::invalid("Heun trajectory without midpoints"))?;
    let mut out = Collector::new(schedule.depth());
    heun_sweep(
        family,
        schedule,
        traj.output(),
        output_grad,
        |n, _| Ok((traj.nodes[n].clone(), mids[n].clone())),
        &mut out,
    )?;
    Ok(out.finish())
}

/// Memory-free Euler backpropagation: reconstructs `x̃_n` backwards from
/// `x_N` and pulls the gradient back through it, one layer at a time.
///
/// Only the current state, the current gradient and one layer gradient are
/// alive at any point; results are streamed to `sink`.
pub fn adjoint_sweep_euler<T, F, S>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    output_grad: &[T],
    sink: &mut S,
) -> Result<()>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
    S: GradientSink<T> + ?Sized,
{
    let h = T::one() / T::from_count(schedule.depth());
    euler_sweep(
        family,
        schedule,
        x_final,
        output_grad,
        |n, next| {
            let x = euler_inverse_step(family, schedule.layer(n), next, h);
            check_state(n, &x)?;
            Ok(x)
        },
        sink,
    )
}

/// Memory-free Heun backpropagation. Each reconstructed `x̃_n` comes from the
/// reverse Heun step; the forward midpoint is then recomputed from `x̃_n` so
/// the chain rule of the forward step applies unchanged.
pub fn adjoint_sweep_heun<T, F, S>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    output_grad: &[T],
    sink: &mut S,
) -> Result<()>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
    S: GradientSink<T> + ?Sized,
{
    let h = T::one() / T::from_count(schedule.depth());
    heun_sweep(
        family,
        schedule,
        x_final,
        output_grad,
        |n, next| {
            let theta = schedule.layer(n);
            let (_, x) = heun_inverse_step(family, theta, schedule.extended(n + 1), next, h);
            check_state(n, &x)?;
            let y = x.clone().plus_scaled(h, &family.eval(&x, theta));
            Ok((x, y))
        },
        sink,
    )
}

pub fn backprop_adjoint_euler<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    output_grad: &[T],
) -> Result<GradientSet<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let mut out = Collector::new(schedule.depth());
    adjoint_sweep_euler(family, schedule, x_final, output_grad, &mut out)?;
    Ok(out.finish())
}

pub fn backprop_adjoint_heun<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    output_grad: &[T],
) -> Result<GradientSet<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let mut out = Collector::new(schedule.depth());
    adjoint_sweep_heun(family, schedule, x_final, output_grad, &mut out)?;
    Ok(out.finish())
}

/// Exact gradients for a trajectory of either scheme.
pub fn backprop_exact_for<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    traj: &Trajectory<T>,
    output_grad: &[T],
) -> Result<GradientSet<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    match traj.scheme {
        Scheme::Euler => backprop_exact(family, schedule, traj, output_grad),
        Scheme::Heun => backprop_exact_heun(family, schedule, traj, output_grad),
    }
}

/// Memory-free gradients with the reverse sweep matching `scheme`.
pub fn backprop_adjoint<T, F>(
    scheme: Scheme,
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    output_grad: &[T],
) -> Result<GradientSet<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    match scheme {
        Scheme::Euler => backprop_adjoint_euler(family, schedule, x_final, output_grad),
        Scheme::Heun => backprop_adjoint_heun(family, schedule, x_final, output_grad),
    }
}
