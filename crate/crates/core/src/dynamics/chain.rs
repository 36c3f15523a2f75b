use crate::error::{check_dim, Result};
use crate::numerics::{axpy, Vector};
use crate::residual::{ResidualFamily, WeightSchedule};
use crate::scalar::Scalar;

use super::trajectory::{check_state, Scheme, Trajectory};

/// One Euler residual step `x + (1/N) f(x, θ)`.
#[inline]
pub(crate) fn euler_step<T, F>(family: &F, theta: &[T], x: &[T], h: T) -> Vector<T>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let mut out = Vector::from_slice(x);
    axpy(&mut out, h, &family.eval(x, theta));
    out
}

/// One Heun step from `x_n`, returning `(y_n, x_{n+1})`.
#[inline]
pub(crate) fn heun_step<T, F>(family: &F, theta: &[T], theta_next: &[T], x: &[T], h: T) -> (Vector<T>, Vector<T>)
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let a = family.eval(x, theta);
    let y = Vector::from_slice(x).plus_scaled(h, &a);
    let b = family.eval(&y, theta_next);
    let half = h * T::c(0.5);
    let next = Vector::from_slice(x).plus_scaled(half, &a).plus_scaled(half, &b);
    (y, next)
}

pub(crate) fn check_inputs<T, F>(family: &F, schedule: &WeightSchedule<T>, x0: &[T]) -> Result<()>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    check_dim("chain input state", family.state_dim(), x0.len())?;
    check_dim("chain schedule parameters", family.param_dim(), schedule.param_dim())?;
    check_state(0, x0)
}

/// Depth-scaled residual chain `x_{n+1} = x_n + (1/N) f(x_n, θ_n)`.
pub fn forward_euler_chain<T, F>(family: &F, schedule: &WeightSchedule<T>, x0: &[T]) -> Result<Trajectory<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    check_inputs(family, schedule, x0)?;
    let depth = schedule.depth();
    let h = T::one() / T::from_count(depth);
    let mut nodes = Vec::with_capacity(depth + 1);
    nodes.push(Vector::from_slice(x0));
    for n in 0..depth {
        let next = euler_step(family, schedule.layer(n), &nodes[n], h);
        check_state(n + 1, &next)?;
        nodes.push(next);
    }
    Ok(Trajectory::new(Scheme::Euler, nodes, None))
}

/// Heun residual chain:
/// `y_n = x_n + (1/N) f(x_n, θ_n)`,
/// `x_{n+1} = x_n + (1/2N)(f(x_n, θ_n) + f(y_n, θ_{n+1}))`.
///
/// The final step reads `θ_N` through [`WeightSchedule::extended`].
pub fn forward_heun_chain<T, F>(family: &F, schedule: &WeightSchedule<T>, x0: &[T]) -> Result<Trajectory<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    check_inputs(family, schedule, x0)?;
    let depth = schedule.depth();
    let h = T::one() / T::from_count(depth);
    let mut nodes = Vec::with_capacity(depth + 1);
    let mut mids = Vec::with_capacity(depth);
    nodes.push(Vector::from_slice(x0));
    for n in 0..depth {
        let (y, next) = heun_step(family, schedule.layer(n), schedule.extended(n + 1), &nodes[n], h);
        check_state(n + 1, &next)?;
        mids.push(y);
        nodes.push(next);
    }
    Ok(Trajectory::new(Scheme::Heun, nodes, Some(mids)))
}

/// Runs the chain selected by `scheme`.
pub fn forward_chain<T, F>(scheme: Scheme, family: &F, schedule: &WeightSchedule<T>, x0: &[T]) -> Result<Trajectory<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    match scheme {
        Scheme::Euler => forward_euler_chain(family, schedule, x0),
        Scheme::Heun => forward_heun_chain(family, schedule, x0),
    }
}

/// Final state `x_N` of the chain selected by `scheme`, keeping only the
/// current state alive.
pub fn forward_output<T, F>(scheme: Scheme, family: &F, schedule: &WeightSchedule<T>, x0: &[T]) -> Result<Vector<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    check_inputs(family, schedule, x0)?;
    let depth = schedule.depth();
    let h = T::one() / T::from_count(depth);
    let mut x = Vector::from_slice(x0);
    for n in 0..depth {
        x = match scheme {
            Scheme::Euler => euler_step(family, schedule.layer(n), &x, h),
            Scheme::Heun => heun_step(family, schedule.layer(n), schedule.extended(n + 1), &x, h).1,
        };
        check_state(n + 1, &x)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::residual::*;

    fn scalar_linear(depth: usize, theta: f64) -> (LinearFamily, WeightSchedule<f64>) {
        (
            make_linear_family(1).unwrap(),
            WeightSchedule::constant(depth, &[theta]).unwrap(),
        )
    }

    #[test]
    fn output_only_pass_matches_stored_chain() {
        let f = make_mlp_family(3, 4).unwrap();
        let s = WeightSchedule::from_fn(17, f.param_dim(), |n| {
            Vector::from_fn(f.param_dim(), |i| ((n * 7 + i) as f64 * 0.37).sin() * 0.3)
        })
        .unwrap();
        let x0 = [0.2, -0.4, 0.9];
        for scheme in [Scheme::Euler, Scheme::Heun] {
            let t = forward_chain(scheme, &f, &s, &x0).unwrap();
            assert_eq!(&forward_output(scheme, &f, &s, &x0).unwrap(), t.output());
        }
    }

    fn values(t: &Trajectory<f64>) -> Vec<f64> {
        t.nodes.iter().map(|x| x[0]).collect()
    }

    #[test]
    fn zero_family_keeps_state() {
        let fam = make_zero_family(2, 1).unwrap();
        let s = WeightSchedule::constant(5, &[1.0]).unwrap();
        let t = forward_euler_chain(&fam, &s, &[0.3, -0.2]).unwrap();
        assert!(t.nodes.iter().all(|x| x.as_slice() == [0.3, -0.2]));
    }

    #[test]
    fn euler_scalar_linear_by_hand() {
        // (1 + 1/2)² = 2.25
        let (f, s) = scalar_linear(2, 1.0);
        let t = forward_euler_chain(&f, &s, &[1.0]).unwrap();
        assert_eq!(values(&t), vec![1.0, 1.5, 2.25]);
        assert!(t.midpoints.is_none());
    }

    #[test]
    fn euler_index_schedule() {
        let f = make_offset_family(1).unwrap();
        let s = make_index_schedule::<f64>(2).unwrap();
        let t = forward_euler_chain(&f, &s, &[0.0]).unwrap();
        assert_eq!(t.output()[0], 0.5);
        // x_N = x_0 + (N − 1)/2
        let s = make_index_schedule::<f64>(1000).unwrap();
        let t = forward_euler_chain(&f, &s, &[0.0]).unwrap();
        assert!((t.output()[0] - 499.5).abs() < 1e-9);
    }

    #[test]
    fn heun_scalar_linear_by_hand() {
        // per-step factor 1 + 1/2 + 1/8 = 1.625
        let (f, s) = scalar_linear(2, 1.0);
        let t = forward_heun_chain(&f, &s, &[1.0]).unwrap();
        assert_eq!(values(&t), vec![1.0, 1.625, 2.640625]);
        assert_eq!(t.midpoints.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn heun_scalar_linear_approaches_exponential() {
        let (f, s) = scalar_linear(1000, 1.0);
        let t = forward_heun_chain(&f, &s, &[1.0]).unwrap();
        assert!((t.output()[0] - std::f64::consts::E).abs() <= 1e-5);
    }

    #[test]
    fn heun_equals_euler_for_state_independent_residuals() {
        let f = make_offset_family(1).unwrap();
        let s = WeightSchedule::<f64>::constant(7, &[0.8]).unwrap();
        let e = forward_euler_chain(&f, &s, &[0.1]).unwrap();
        let h = forward_heun_chain(&f, &s, &[0.1]).unwrap();
        for (a, b) in e.nodes.iter().zip(&h.nodes) {
            assert!((a[0] - b[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_names_the_layer() {
        let (f, s) = scalar_linear(10, 40.0);
        // growth factor 5 per step: 5^k > 1e12 first at k = 18 > 10, so scale x0
        let err = forward_euler_chain(&f, &s, &[1e6]).unwrap_err();
        match err {
            Error::Divergence { layer, .. } => assert_eq!(layer, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (f, s) = scalar_linear(2, 1.0);
        assert!(forward_euler_chain(&f, &s, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_precision_chain_tracks_double() {
        let f = make_linear_family(1).unwrap();
        let s32 = WeightSchedule::<f32>::constant(64, &[0.7]).unwrap();
        let s64 = WeightSchedule::<f64>::constant(64, &[0.7]).unwrap();
        let a = forward_heun_chain(&f, &s32, &[1.0f32]).unwrap();
        let b = forward_heun_chain(&f, &s64, &[1.0f64]).unwrap();
        assert!((a.output()[0] as f64 - b.output()[0]).abs() < 1e-5);
    }
}
