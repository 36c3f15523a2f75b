use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ordinary least-squares fit of `log(error)` against `log(N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Coefficient of determination, clamped to `[0, 1]`. A perfectly flat
    /// series (zero total variance) reports 1.
    pub r_squared: T,
    pub points_used: usize,
}

/// Fits `log(error) = intercept + slope·log(N)`.
///
/// Requires at least two points, strictly increasing depths `N ≥ 1`, and
/// strictly positive errors. Callers drop rounding-floor points first, see
/// [`drop_floor_points`].
pub fn fit_loglog_slope<T: Scalar>(points: &[(usize, T)]) -> Result<SlopeFit<T>> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "slope fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    for (i, &(n, err)) in points.iter().enumerate() {
        if n == 0 {
            return Err(Error::invalid("slope fit depth must be >= 1"));
        }
        if !(err > T::zero()) || !err.is_finite() {
            return Err(Error::invalid(format!(
                "slope fit error at N = {n} must be positive and finite, got {err}"
            )));
        }
        if i > 0 && points[i - 1].0 >= n {
            return Err(Error::invalid("slope fit depths must be strictly increasing"));
        }
    }
    let k = T::from_count(points.len());
    let xs: Vec<T> = points.iter().map(|&(n, _)| T::from_count(n).ln()).collect();
    let ys: Vec<T> = points.iter().map(|&(_, e)| e.ln()).collect();
    let mx = xs.iter().copied().sum::<T>() / k;
    let my = ys.iter().copied().sum::<T>() / k;
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: T = ys.iter().map(|&y| (y - my) * (y - my)).sum();
    let ss_res: T = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if ss_tot <= T::epsilon() * T::epsilon() * (my * my).max(T::one()) {
        T::one()
    } else {
        (T::one() - ss_res / ss_tot).max(T::zero()).min(T::one())
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        points_used: points.len(),
    })
}

/// Removes points whose error lies below `100·ε·magnitude`, i.e. inside the
/// rounding noise of quantities of size `magnitude`.
pub fn drop_floor_points<T: Scalar>(points: &[(usize, T)], magnitude: T) -> Vec<(usize, T)> {
    let floor = noise_floor(magnitude);
    points.iter().copied().filter(|&(_, e)| e > floor).collect()
}

pub fn noise_floor<T: Scalar>(magnitude: T) -> T {
    T::c(100.0) * T::epsilon() * magnitude.abs().max(T::one())
}
