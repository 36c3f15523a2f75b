use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::random::{in_ball, rng_from_seed};
use crate::numerics::{distance, Vector};
use crate::scalar::Scalar;

use super::field::VectorField;
use super::oracle::OdeSolution;
use super::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationError<T> {
    /// `‖x_n − x(n/N)‖` for `n = 0..=N`.
    pub per_node: Vec<T>,
    pub max: T,
}

/// Distance between each chain node and the ODE solution at the matching time.
pub fn approximation_error<T: Scalar>(traj: &Trajectory<T>, sol: &OdeSolution<T>) -> Result<ApproximationError<T>> {
    let depth = traj.depth();
    if !sol.oracle_steps.is_multiple_of(depth) {
        return Err(Error::invalid(format!(
            "solution grid of {} steps does not contain every n/{depth}",
            sol.oracle_steps
        )));
    }
    let mut per_node = Vec::with_capacity(depth + 1);
    for (n, x) in traj.nodes.iter().enumerate() {
        let y = sol.state_at_fraction(n, depth)?;
        if y.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                context: "approximation_error",
                expected: x.dim(),
                found: y.dim(),
            });
        }
        per_node.push(distance(x, y));
    }
    let max = per_node.iter().fold(T::zero(), |m, &e| m.max(e));
    Ok(ApproximationError { per_node, max })
}

/// Error bound `(e^L − 1)/(2NL) · C_N`, read as `C_N/(2N)` when `L = 0`.
pub fn approximation_bound<T: Scalar>(l: T, c_n: T, depth: usize) -> Result<T> {
    if depth == 0 {
        return Err(Error::invalid("depth must be >= 1"));
    }
    if !(l >= T::zero()) || !(c_n >= T::zero()) {
        return Err(Error::invalid("Lipschitz constant and C_N must be nonnegative"));
    }
    let two_n = T::c(2.0) * T::from_count(depth);
    // exp_m1 keeps (e^L − 1)/L accurate for tiny L
    let growth = if l == T::zero() { T::one() } else { l.exp_m1() / l };
    Ok(growth * c_n / two_n)
}

/// Sampled supremum of `‖∂_s φ + ∂_x φ[φ]‖` over the ball of radius
/// `region_radius` and `s ∈ [0, 1]`.
///
/// The `s`-derivative is a forward difference of step `1/(100 P)` on a field
/// with `P` pieces, taken inside one piece. The `x`-derivative along `φ` is a
/// central difference.
pub fn estimate_c_n<T, V>(field: &V, region_radius: T, samples: usize, seed: u64) -> Result<T>
where
    T: Scalar,
    V: VectorField<T> + ?Sized,
{
    if !(region_radius > T::zero()) || samples == 0 {
        return Err(Error::invalid("estimate_c_n needs a positive radius and samples"));
    }
    let pieces = field.segments();
    let width = T::one() / T::from_count(pieces);
    let hs = width / T::c(100.0);
    let mut rng = rng_from_seed(seed);
    let mut best = T::zero();
    for _ in 0..samples {
        let x = in_ball(&mut rng, field.dim(), region_radius);
        let n = rng.random_range(0..pieces);
        let u: f64 = rng.random_range(0.0..1.0);
        let s = (T::from_count(n) + T::c(u * 0.99)) * width;
        let phi = field.eval_in(&x, s, n);
        let ds = field.eval_in(&x, s + hs, n).sub(&phi).scaled(T::one() / hs);
        let pn = phi.norm();
        let along = if pn > T::zero() {
            let scale = T::c(1e-5) * x.norm().max(T::one()) / pn;
            let plus = field.eval_in(&x.clone().plus_scaled(scale, &phi), s, n);
            let minus = field.eval_in(&x.clone().plus_scaled(-scale, &phi), s, n);
            plus.sub(&minus).scaled(T::one() / (T::c(2.0) * scale))
        } else {
            Vector::zeros(field.dim())
        };
        let total = ds.add(&along).norm();
        if !total.is_finite() {
            return Err(Error::NonFinite("C_N sample".into()));
        }
        best = best.max(total);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::chain::{forward_euler_chain, forward_heun_chain};
    use crate::dynamics::field::{interpolate, FieldKind, FnField};
    use crate::dynamics::oracle::{solve_ode_default, solve_ode_oracle};
    use crate::numerics::fit_loglog_slope;
    use crate::residual::*;

    #[test]
    fn bound_values() {
        assert!((approximation_bound(0.0f64, 1.0, 10).unwrap() - 0.05).abs() < 1e-15);
        assert!((approximation_bound(1e-12f64, 1.0, 10).unwrap() - 0.05).abs() < 1e-10);
        let want = (std::f64::consts::E - 1.0) / 100.0;
        assert!((approximation_bound(1.0, 2.0, 100).unwrap() - want).abs() < 1e-15);
        assert!(approximation_bound(-1.0, 1.0, 10).is_err());
        assert!(approximation_bound(1.0, -1.0, 10).is_err());
        assert!(approximation_bound(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn zero_field_zero_error() {
        let f = make_zero_family(2, 1).unwrap();
        let s = WeightSchedule::constant(4, &[0.0]).unwrap();
        let t = forward_euler_chain(&f, &s, &[1.0, 2.0]).unwrap();
        let field = interpolate(&f, &s, FieldKind::ResidualInterp).unwrap();
        let sol = solve_ode_default(&field, &[1.0, 2.0]).unwrap();
        let e = approximation_error(&t, &sol).unwrap();
        assert_eq!(e.max, 0.0);
        assert_eq!(e.per_node.len(), 5);
    }

    /// Offset-family schedule whose residual interpolation is `φ = s`.
    fn line_schedule(depth: usize) -> WeightSchedule<f64> {
        WeightSchedule::from_fn(depth, 1, |n| Vector::from(vec![n as f64 / depth as f64]))
            .unwrap()
            .with_terminal(Vector::from(vec![1.0]))
            .unwrap()
    }

    #[test]
    fn affine_in_s_field_error_is_one_over_2n() {
        let f = make_offset_family(1).unwrap();
        for depth in [10, 100, 1000] {
            let s = line_schedule(depth);
            let t = forward_euler_chain(&f, &s, &[0.0]).unwrap();
            let field = interpolate(&f, &s, FieldKind::ResidualInterp).unwrap();
            let sol = solve_ode_oracle(&field, &[0.0], 4 * depth).unwrap();
            let e = approximation_error(&t, &sol).unwrap();
            let gap = (t.output()[0] - sol.final_state()[0]).abs();
            let want = 1.0 / (2.0 * depth as f64);
            assert!((gap - want).abs() < 1e-9, "depth {depth}: {gap}");
            assert!((e.max - want).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_mismatch() {
        let f = make_offset_family(1).unwrap();
        let s = line_schedule(3);
        let t = forward_euler_chain(&f, &s, &[0.0]).unwrap();
        let field = FnField::new(1, |_x: &[f64], s, _| Vector::filled(1, s));
        let sol = solve_ode_oracle(&field, &[0.0], 16).unwrap();
        assert!(approximation_error(&t, &sol).is_err());
    }

    #[test]
    fn index_schedule_gap_stays_one_half() {
        let f = make_offset_family(1).unwrap();
        // x_N = (N − 1)/2 while x(1) = N/2
        for depth in [10, 100, 1000] {
            let s = make_index_schedule::<f64>(depth).unwrap();
            let t = forward_euler_chain(&f, &s, &[0.0]).unwrap();
            let field = interpolate(&f, &s, FieldKind::ResidualInterp).unwrap();
            let sol = solve_ode_oracle(&field, &[0.0], 4 * depth).unwrap();
            let gap = (t.output()[0] - sol.final_state()[0]).abs();
            assert!((gap - 0.5).abs() < 1e-9 * depth as f64, "depth {depth}: {gap}");
        }
    }

    #[test]
    fn c_n_of_a_line_and_a_constant() {
        let a = [0.6, -0.8];
        let field = FnField::new(2, move |_x: &[f64], s, _| Vector::from(vec![a[0] * s, a[1] * s + 0.3]));
        let c = estimate_c_n(&field, 1.0, 200, 1).unwrap();
        assert!((c - 1.0).abs() < 0.05, "{c}");
        let constant = FnField::new(2, |_x: &[f64], _s, _| Vector::from(vec![0.2, 0.1]));
        assert_eq!(estimate_c_n(&constant, 1.0, 200, 1).unwrap(), 0.0);
    }

    #[test]
    fn c_n_of_index_schedule_grows_linearly() {
        let f = make_offset_family(1).unwrap();
        let mut points = Vec::new();
        for depth in [4, 16, 64] {
            let s = make_index_schedule::<f64>(depth).unwrap();
            let field = interpolate(&f, &s, FieldKind::ResidualInterp).unwrap();
            let c = estimate_c_n(&field, 1.0, 100, 2).unwrap();
            // ∂_s φ = N on every piece, and φ does not depend on x
            assert!((c - depth as f64).abs() < 1e-6 * depth as f64, "{c}");
            points.push((depth, c));
        }
        let fit = fit_loglog_slope(&points).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bound_holds_on_a_smooth_mlp_schedule() {
        let f = make_mlp_family(2, 4).unwrap();
        let base: Vec<f64> = (0..f.param_dim()).map(|i| 0.3 * ((i as f64) * 0.7).sin()).collect();
        for depth in [8, 32] {
            let s = WeightSchedule::from_fn(depth, f.param_dim(), |n| {
                let t = n as f64 / depth as f64;
                base.iter().map(|b| b * (1.0 + t)).collect()
            })
            .unwrap()
            .with_terminal(base.iter().map(|b| 2.0 * b).collect())
            .unwrap();
            let x0 = [0.5, -0.5];
            let t = forward_euler_chain(&f, &s, &x0).unwrap();
            let field = interpolate(&f, &s, FieldKind::ResidualInterp).unwrap();
            let sol = solve_ode_default(&field, &x0).unwrap();
            let err = approximation_error(&t, &sol).unwrap();
            let radius = 1.2 * t.extent().max(sol.states.iter().fold(0.0, |m, x| m.max(x.norm())));
            let consts = estimate_constants(&f, &s, radius, 400, 3).unwrap();
            let c_n = estimate_c_n(&field, radius, 400, 3).unwrap();
            let bound = approximation_bound(1.2 * consts.l_f, 1.2 * c_n, depth).unwrap();
            assert!(err.max <= bound * 1.1, "depth {depth}: {} > {bound}", err.max);
        }
    }

    #[test]
    fn heun_converges_at_second_order() {
        let f = make_mlp_family(2, 4).unwrap();
        let theta: Vec<f64> = (0..f.param_dim()).map(|i| 0.5 * ((i as f64) * 1.3).cos()).collect();
        let x0 = [0.4, 0.2];
        let mut points = Vec::new();
        for depth in [8, 16, 32, 64, 128] {
            let s = WeightSchedule::constant(depth, &theta).unwrap();
            let t = forward_heun_chain(&f, &s, &x0).unwrap();
            let field = interpolate(&f, &s, FieldKind::ResidualInterp).unwrap();
            let sol = solve_ode_default(&field, &x0).unwrap();
            points.push((depth, approximation_error(&t, &sol).unwrap().max));
        }
        let fit = fit_loglog_slope(&points).unwrap();
        assert!(fit.slope <= -1.8, "slope {}", fit.slope);
    }
}
