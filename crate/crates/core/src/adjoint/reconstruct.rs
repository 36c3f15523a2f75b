use crate::dynamics::{check_state, Scheme, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{distance, Vector};
use crate::residual::{ResidualFamily, WeightSchedule};
use crate::scalar::Scalar;

/// A reverse-time reconstruction of a chain, with its error against the
/// forward trajectory when that was supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport<T> {
    /// `x̃_0 … x̃_N`. For Heun the midpoints are the backward stages `ỹ_n`.
    pub reconstructed: Trajectory<T>,
    /// `‖x_n − x̃_n‖` for `n = 0..=N`.
    pub per_node_error: Option<Vec<T>>,
    pub max_error: Option<T>,
}

/// One reverse Euler step `x̃_n = x̃_{n+1} − (1/N) f(x̃_{n+1}, θ_n)`.
#[inline]
pub(crate) fn euler_inverse_step<T, F>(family: &F, theta: &[T], x_next: &[T], h: T) -> Vector<T>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    Vector::from_slice(x_next).plus_scaled(-h, &family.eval(x_next, theta))
}

/// One reverse Heun step, returning `(ỹ_n, x̃_n)` with
/// `ỹ_n = x̃_{n+1} − (1/N) f(x̃_{n+1}, θ_{n+1})` and
/// `x̃_n = x̃_{n+1} − (1/2N)(f(x̃_{n+1}, θ_{n+1}) + f(ỹ_n, θ_n))`.
#[inline]
pub(crate) fn heun_inverse_step<T, F>(
    family: &F,
    theta: &[T],
    theta_next: &[T],
    x_next: &[T],
    h: T,
) -> (Vector<T>, Vector<T>)
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    let a = family.eval(x_next, theta_next);
    let y = Vector::from_slice(x_next).plus_scaled(-h, &a);
    let b = family.eval(&y, theta);
    let half = h * T::c(0.5);
    let x = Vector::from_slice(x_next).plus_scaled(-half, &a).plus_scaled(-half, &b);
    (y, x)
}

fn prepare<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    truth: Option<&Trajectory<T>>,
    scheme: Scheme,
) -> Result<()>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    check_dim("reconstruction state", family.state_dim(), x_final.len())?;
    check_dim("reconstruction parameters", family.param_dim(), schedule.param_dim())?;
    check_state(schedule.depth(), x_final)?;
    if let Some(t) = truth {
        if t.scheme != scheme {
            return Err(Error::invalid("reference trajectory uses a different scheme"));
        }
        check_dim("reference trajectory depth", schedule.depth(), t.depth())?;
    }
    Ok(())
}

fn report<T: Scalar>(reconstructed: Trajectory<T>, truth: Option<&Trajectory<T>>) -> ReconstructionReport<T> {
    let per_node_error: Option<Vec<T>> = truth.map(|t| {
        t.nodes
            .iter()
            .zip(&reconstructed.nodes)
            .map(|(a, b)| distance(a, b))
            .collect()
    });
    let max_error = per_node_error
        .as_ref()
        .map(|e| e.iter().fold(T::zero(), |m, &v| m.max(v)));
    ReconstructionReport {
        reconstructed,
        per_node_error,
        max_error,
    }
}

/// Rebuilds an Euler chain backwards from its output `x_N`.
pub fn reconstruct_backward_euler<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    truth: Option<&Trajectory<T>>,
) -> Result<ReconstructionReport<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    prepare(family, schedule, x_final, truth, Scheme::Euler)?;
    let depth = schedule.depth();
    let h = T::one() / T::from_count(depth);
    let mut nodes = vec![Vector::zeros(0); depth + 1];
    nodes[depth] = Vector::from_slice(x_final);
    for n in (0..depth).rev() {
        let x = euler_inverse_step(family, schedule.layer(n), &nodes[n + 1], h);
        check_state(n, &x)?;
        nodes[n] = x;
    }
    Ok(report(Trajectory::new(Scheme::Euler, nodes, None), truth))
}

/// Rebuilds a Heun chain backwards from its output `x_N`.
pub fn reconstruct_backward_heun<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    x_final: &[T],
    truth: Option<&Trajectory<T>>,
) -> Result<ReconstructionReport<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    prepare(family, schedule, x_final, truth, Scheme::Heun)?;
    let depth = schedule.depth();
    let h = T::one() / T::from_count(depth);
    let mut nodes = vec![Vector::zeros(0); depth + 1];
    let mut mids = vec![Vector::zeros(0); depth];
    nodes[depth] = Vector::from_slice(x_final);
    for n in (0..depth).rev() {
        let (y, x) = heun_inverse_step(family, schedule.layer(n), schedule.extended(n + 1), &nodes[n + 1], h);
        check_state(n, &x)?;
        mids[n] = y;
        nodes[n] = x;
    }
    Ok(report(Trajectory::new(Scheme::Heun, nodes, Some(mids)), truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{forward_euler_chain, forward_heun_chain};
    use crate::residual::*;

    #[test]
    fn zero_family_reconstructs_exactly() {
        let f = make_zero_family(2, 1).unwrap();
        let s = WeightSchedule::constant(6, &[0.0]).unwrap();
        let t = forward_euler_chain(&f, &s, &[0.1, 0.2]).unwrap();
        let r = reconstruct_backward_euler(&f, &s, t.output(), Some(&t)).unwrap();
        assert_eq!(r.max_error, Some(0.0));
    }

    #[test]
    fn euler_scalar_linear_by_hand() {
        let f = make_linear_family(1).unwrap();
        let s = WeightSchedule::<f64>::constant(2, &[1.0]).unwrap();
        let t = forward_euler_chain(&f, &s, &[1.0]).unwrap();
        let r = reconstruct_backward_euler(&f, &s, t.output(), Some(&t)).unwrap();
        let xs: Vec<f64> = r.reconstructed.nodes.iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![0.5625, 1.125, 2.25]);
        assert_eq!(r.per_node_error.as_ref().unwrap(), &vec![0.4375, 0.375, 0.0]);
        assert_eq!(r.max_error, Some(0.4375));
    }

    #[test]
    fn heun_scalar_linear_by_hand() {
        let f = make_linear_family(1).unwrap();
        let s = WeightSchedule::<f64>::constant(2, &[1.0]).unwrap();
        let t = forward_heun_chain(&f, &s, &[1.0]).unwrap();
        let r = reconstruct_backward_heun(&f, &s, t.output(), Some(&t)).unwrap();
        assert_eq!(r.reconstructed.nodes[1][0], 1.650390625);
        let e1 = r.per_node_error.as_ref().unwrap()[1];
        assert!((e1 - 0.025390625).abs() < 1e-15);
        assert!(e1 < 0.375 / 10.0);
    }

    #[test]
    fn state_independent_residuals_invert_exactly() {
        let f = make_square_family();
        let s = make_alternating_sign_schedule::<f64>(9).unwrap();
        let t = forward_heun_chain(&f, &s, &[0.25]).unwrap();
        let r = reconstruct_backward_heun(&f, &s, t.output(), Some(&t)).unwrap();
        assert!(r.max_error.unwrap() < 1e-15);
        let t = forward_euler_chain(&f, &s, &[0.25]).unwrap();
        let r = reconstruct_backward_euler(&f, &s, t.output(), Some(&t)).unwrap();
        assert!(r.max_error.unwrap() < 1e-15);
    }

    #[test]
    fn scheme_mismatch_is_rejected() {
        let f = make_linear_family(1).unwrap();
        let s = WeightSchedule::<f64>::constant(2, &[1.0]).unwrap();
        let t = forward_heun_chain(&f, &s, &[1.0]).unwrap();
        assert!(reconstruct_backward_euler(&f, &s, t.output(), Some(&t)).is_err());
    }

    #[test]
    fn reconstruction_without_truth() {
        let f = make_linear_family(1).unwrap();
        let s = WeightSchedule::<f64>::constant(2, &[1.0]).unwrap();
        let r = reconstruct_backward_euler(&f, &s, &[2.25], None).unwrap();
        assert!(r.per_node_error.is_none() && r.max_error.is_none());
    }

    #[test]
    fn unstable_reverse_sweep_reports_divergence() {
        let f = make_linear_family(1).unwrap();
        // reverse factor 1 − θ/N = −9 per step
        let s = WeightSchedule::<f64>::constant(20, &[200.0]).unwrap();
        let err = reconstruct_backward_euler(&f, &s, &[1.0], None).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }
}
