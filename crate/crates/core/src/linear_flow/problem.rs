use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// Deep linear regression `min ‖Π − B‖²_Σ` with `‖A‖²_Σ = Tr(A Σ Aᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem<T> {
    pub sigma: Matrix<T>,
    pub b_target: Matrix<T>,
    /// Smallest eigenvalue of `Σ`.
    pub m: T,
    /// Largest eigenvalue of `Σ`.
    pub m_max: T,
}

pub fn build_problem<T: Scalar>(sigma: Matrix<T>, b_target: Matrix<T>) -> Result<RegressionProblem<T>> {
    if !sigma.is_square() || b_target.rows() != sigma.rows() || b_target.cols() != sigma.rows() {
        return Err(Error::invalid(format!(
            "Σ is {}×{} and B is {}×{}; both must be d×d",
            sigma.rows(),
            sigma.cols(),
            b_target.rows(),
            b_target.cols()
        )));
    }
    if !b_target.is_finite() {
        return Err(Error::NonFinite("regression target".into()));
    }
    let scale = sigma.frobenius_norm().max(T::one());
    if !sigma.is_symmetric(T::c(1e-12) * scale) {
        return Err(Error::invalid("Σ must be symmetric"));
    }
    let eig = sigma.symmetric_eigenvalues()?;
    let m = eig[0];
    let m_max = eig[eig.len() - 1];
    if !(m > T::zero()) {
        return Err(Error::invalid(format!(
            "Σ must be positive definite; smallest eigenvalue is {m:e}"
        )));
    }
    Ok(RegressionProblem {
        sigma,
        b_target,
        m,
        m_max,
    })
}

impl<T: Scalar> RegressionProblem<T> {
    pub fn dim(&self) -> usize {
        self.sigma.rows()
    }

    /// `‖A‖²_Σ = Tr(A Σ Aᵀ)`.
    pub fn sigma_norm_sq(&self, a: &Matrix<T>) -> T {
        a.matmul(&self.sigma).matmul(&a.transpose()).trace()
    }

    /// Upper limit `m / (4·√(2 M e³))` on `√ℓ(0)`.
    pub fn loss_root_threshold(&self) -> T {
        let e3 = T::c(3.0).exp();
        self.m / (T::c(4.0) * (T::c(2.0) * self.m_max * e3).sqrt())
    }

    /// Largest flow time step used by default, `min(1e−2, 0.1/M)`.
    pub fn default_dt(&self) -> T {
        T::c(1e-2).min(T::c(0.1) / self.m_max)
    }

    /// Decay rate `(2/e)·m` of the loss envelope.
    pub fn decay_rate(&self) -> T {
        T::c(2.0) / T::c(1.0).exp() * self.m
    }
}
