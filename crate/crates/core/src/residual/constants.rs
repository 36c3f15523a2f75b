use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::numerics::random::{in_ball, rng_from_seed};
use crate::numerics::{distance, Vector};
use crate::residual::family::ResidualFamily;
use crate::residual::schedule::WeightSchedule;
use crate::scalar::Scalar;

/// Sampled boundedness and Lipschitz constants of a residual family over a
/// schedule, on the ball `‖x‖ ≤ region_radius`. Matrix-valued quantities are
/// measured in the spectral norm.
///
/// Every field is a supremum over a finite sample, hence a lower bound on the
/// true constant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SmoothnessConstants<T> {
    /// `sup ‖f(x, θ_n)‖`
    pub c_f: T,
    /// `sup ‖∂ₓf(x, θ_n)‖`
    pub l_f: T,
    /// Lipschitz constant of `x ↦ ∂ₓf(x, θ_n)`
    pub l_df: T,
    /// `sup ‖∂_θ f(x, θ_n)‖`
    pub omega: T,
    /// Lipschitz constant of `x ↦ ∂_θ f(x, θ_n)`
    pub delta_param: T,
    /// Lipschitz constant of `θ ↦ f(x, θ)` over schedule parameters
    pub l_theta: T,
    /// Lipschitz constant of `θ ↦ ∂ₓf(x, θ)` over schedule parameters
    pub l_theta_prime: T,
    /// `sup ‖(J_{n+1} − J_n)[f_{n+1} − f_n]‖` over adjacent layers, the
    /// quantity driving the one-step Heun reconstruction residual.
    pub jac_diff: T,
    pub region_radius: T,
}

/// Monte-Carlo estimate of [`SmoothnessConstants`].
///
/// Sample `k` draws a layer and two nearby states from a seeded stream, so the
/// first `k` samples of a larger run coincide with a smaller run and the
/// estimates never decrease as `samples` grows.
pub fn estimate_constants<T, F>(
    family: &F,
    schedule: &WeightSchedule<T>,
    region_radius: T,
    samples: usize,
    seed: u64,
) -> Result<SmoothnessConstants<T>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    if samples == 0 {
        return Err(Error::invalid("estimate_constants needs samples >= 1"));
    }
    if !(region_radius > T::zero()) {
        return Err(Error::invalid("region radius must be positive"));
    }
    check_dim("estimate_constants", family.param_dim(), schedule.param_dim())?;
    let d = family.state_dim();
    let depth = schedule.depth();
    let mut rng = rng_from_seed(seed);
    let mut out = SmoothnessConstants {
        region_radius,
        ..Default::default()
    };
    let local = region_radius * T::c(1e-3);
    for _ in 0..samples {
        let n = rng.random_range(0..depth);
        let m = rng.random_range(0..depth);
        let x: Vector<T> = in_ball(&mut rng, d, region_radius);
        let dx: Vector<T> = in_ball(&mut rng, d, local);
        let x2 = x.add(&dx);

        let th = schedule.layer(n);
        let f = family.eval(&x, th);
        out.c_f = out.c_f.max(f.norm());
        let j = family.jac_state(&x, th);
        out.l_f = out.l_f.max(j.spectral_norm()?);
        let jp = family.jac_params(&x, th);
        out.omega = out.omega.max(jp.spectral_norm()?);

        let step = distance(&x, &x2);
        if step > T::zero() {
            let j2 = family.jac_state(&x2, th);
            out.l_df = out.l_df.max(j2.sub(&j).spectral_norm()? / step);
            let jp2 = family.jac_params(&x2, th);
            out.delta_param = out.delta_param.max(jp2.sub(&jp).spectral_norm()? / step);
        }

        let th_m = schedule.layer(m);
        let dth = distance(th, th_m);
        if dth > T::zero() {
            let fm = family.eval(&x, th_m);
            out.l_theta = out.l_theta.max(distance(&f, &fm) / dth);
            let jm = family.jac_state(&x, th_m);
            out.l_theta_prime = out.l_theta_prime.max(jm.sub(&j).spectral_norm()? / dth);
        }

        let th_next = schedule.extended(n + 1);
        let f_next = family.eval(&x, th_next);
        let j_next = family.jac_state(&x, th_next);
        let residual = j_next.sub(&j).mul_vec(&f_next.sub(&f));
        out.jac_diff = out.jac_diff.max(residual.norm());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residual::families::*;

    #[test]
    fn linear_half_identity() {
        let fam = make_linear_family(2).unwrap();
        let sched = WeightSchedule::constant(5, &[0.5, 0.0, 0.0, 0.5]).unwrap();
        let c = estimate_constants(&fam, &sched, 2.0f64, 2000, 11).unwrap();
        // sup ‖θx‖ = ‖θ‖·R = 1
        assert!(c.c_f <= 1.0 + 1e-12 && c.c_f >= 0.95, "c_f = {}", c.c_f);
        assert!((c.l_f - 0.5).abs() < 1e-10);
        assert!(c.l_df.abs() < 1e-12);
        assert_eq!(c.l_theta, 0.0);
    }

    #[test]
    fn zero_family_has_zero_constants() {
        let fam = make_zero_family(3, 2).unwrap();
        let sched = WeightSchedule::constant(4, &[1.0, -1.0]).unwrap();
        let c = estimate_constants(&fam, &sched, 1.0, 200, 3).unwrap();
        assert_eq!(c.c_f, 0.0);
        assert_eq!(c.l_f, 0.0);
        assert_eq!(c.omega, 0.0);
        assert_eq!(c.l_theta, 0.0);
    }

    #[test]
    fn square_family_is_state_independent() {
        let fam = make_square_family();
        let sched = crate::residual::schedule::make_alternating_sign_schedule::<f64>(8).unwrap();
        let c = estimate_constants(&fam, &sched, 3.0, 200, 5).unwrap();
        assert_eq!(c.c_f, 1.0);
        assert_eq!(c.l_f, 0.0);
    }

    #[test]
    fn estimates_grow_monotonically_with_samples() {
        let fam = make_mlp_family(3, 5).unwrap();
        let mut rng = rng_from_seed(9);
        let sched = WeightSchedule::from_fn(6, 30, |_| crate::numerics::random::gaussian_vector(&mut rng, 30)).unwrap();
        let mut prev = estimate_constants(&fam, &sched, 1.5, 1, 21).unwrap();
        for k in [2, 5, 20, 80] {
            let next = estimate_constants(&fam, &sched, 1.5, k, 21).unwrap();
            for (a, b) in [
                (prev.c_f, next.c_f),
                (prev.l_f, next.l_f),
                (prev.l_df, next.l_df),
                (prev.omega, next.omega),
                (prev.delta_param, next.delta_param),
                (prev.l_theta, next.l_theta),
                (prev.l_theta_prime, next.l_theta_prime),
                (prev.jac_diff, next.jac_diff),
            ] {
                assert!(b >= a);
            }
            prev = next;
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let fam = make_linear_family(1).unwrap();
        let sched = WeightSchedule::constant(2, &[1.0]).unwrap();
        assert!(estimate_constants(&fam, &sched, 1.0, 0, 0).is_err());
        assert!(estimate_constants(&fam, &sched, 0.0, 10, 0).is_err());
    }
}
