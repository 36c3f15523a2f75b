use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::residual::WeightSchedule;
use crate::scalar::Scalar;

use super::problem::RegressionProblem;

/// Relative loss increase over one time step that is treated as instability.
pub const LOSS_INCREASE_TOLERANCE: f64 = 1e-9;

/// Layers `θ_1 … θ_N` of a deep linear residual network at flow time `t`.
///
/// Layer `θ_k` is stored at schedule index `k − 1` as a row-major `d × d`
/// matrix, the same layout as the linear residual family, so `Π x` equals
/// the Euler chain of that family.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState<T> {
    pub schedule: WeightSchedule<T>,
    pub dim: usize,
    pub t: T,
}

impl<T: Scalar> FlowState<T> {
    pub fn new(layers: &[Matrix<T>]) -> Result<Self> {
        let dim = layers.first().map(|m| m.rows()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::invalid("a flow state needs at least one non-empty layer"));
        }
        let params = layers
            .iter()
            .map(|m| {
                if m.rows() != dim || m.cols() != dim {
                    return Err(Error::invalid("all layers must be d×d"));
                }
                Ok(Vector::from_slice(m.as_slice()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schedule: WeightSchedule::new(params)?,
            dim,
            t: T::zero(),
        })
    }

    pub fn from_schedule(schedule: WeightSchedule<T>, dim: usize) -> Result<Self> {
        if dim * dim != schedule.param_dim() {
            return Err(Error::invalid(format!(
                "schedule parameters of size {} are not {dim}×{dim} matrices",
                schedule.param_dim()
            )));
        }
        Ok(Self {
            schedule,
            dim,
            t: T::zero(),
        })
    }

    /// `N` copies of `theta`.
    pub fn constant(depth: usize, theta: &Matrix<T>) -> Result<Self> {
        Self::new(&vec![theta.clone(); depth])
    }

    /// `θ_k = g(k/N)` for `k = 1..=N`.
    pub fn from_profile(depth: usize, dim: usize, g: impl Fn(T) -> Matrix<T>) -> Result<Self> {
        let n = T::from_count(depth);
        let layers: Vec<Matrix<T>> = (1..=depth).map(|k| g(T::from_count(k) / n)).collect();
        if layers.iter().any(|m| m.rows() != dim) {
            return Err(Error::invalid("profile returned a matrix of the wrong size"));
        }
        Self::new(&layers)
    }

    pub fn depth(&self) -> usize {
        self.schedule.depth()
    }

    /// `θ_k` for `k` in `1..=N`.
    pub fn layer(&self, k: usize) -> Matrix<T> {
        assert!(
            k >= 1 && k <= self.depth(),
            "layer {k} out of range 1..={}",
            self.depth()
        );
        self.matrix_at(k - 1)
    }

    fn matrix_at(&self, idx: usize) -> Matrix<T> {
        Matrix::from_row_major(self.dim, self.dim, self.schedule.layer(idx).to_vec())
            .expect("layer size checked on construction")
    }

    /// Factors `I + θ_k/N` in layer order.
    fn factors(&self) -> Vec<Matrix<T>> {
        let inv = T::one() / T::from_count(self.depth());
        (0..self.depth())
            .map(|i| self.matrix_at(i).identity_plus_scaled(inv))
            .collect()
    }

    /// `Π = (I + θ_N/N) ⋯ (I + θ_1/N)`.
    pub fn product(&self) -> Matrix<T> {
        self.factors()
            .iter()
            .fold(Matrix::identity(self.dim), |acc, f| f.matmul(&acc))
    }

    /// Largest spectral norm over the layers.
    pub fn max_layer_norm(&self) -> Result<T> {
        (0..self.depth()).try_fold(T::zero(), |m, i| Ok(m.max(self.matrix_at(i).spectral_norm()?)))
    }

    /// Largest Frobenius norm over the layers.
    pub fn max_layer_frobenius(&self) -> T {
        (0..self.depth()).fold(T::zero(), |m, i| m.max(self.matrix_at(i).frobenius_norm()))
    }

    /// `N · max_k ‖θ_{k+1} − θ_k‖` in spectral norm; zero for a single layer.
    pub fn smoothness_stat(&self) -> Result<T> {
        let mut worst = T::zero();
        for i in 1..self.depth() {
            worst = worst.max(self.matrix_at(i).sub(&self.matrix_at(i - 1)).spectral_norm()?);
        }
        Ok(worst * T::from_count(self.depth()))
    }
}

fn check_shapes<T: Scalar>(state: &FlowState<T>, problem: &RegressionProblem<T>) -> Result<()> {
    crate::error::check_dim("flow state dimension", problem.dim(), state.dim)
}

/// `ℓ = ‖Π − B‖²_Σ`.
pub fn loss<T: Scalar>(state: &FlowState<T>, problem: &RegressionProblem<T>) -> Result<T> {
    check_shapes(state, problem)?;
    Ok(problem.sigma_norm_sq(&state.product().sub(&problem.b_target)))
}

/// Rescaled gradient `G_k = Π_{:k}ᵀ (Π − B) Σ Π_{k:}ᵀ` of layer `k ∈ 1..=N`,
/// where `Π_{:k}` multiplies the layers above `k` and `Π_{k:}` those below.
pub fn layer_gradient<T: Scalar>(state: &FlowState<T>, problem: &RegressionProblem<T>, k: usize) -> Result<Matrix<T>> {
    check_shapes(state, problem)?;
    if k == 0 || k > state.depth() {
        return Err(Error::invalid(format!("layer {k} outside 1..={}", state.depth())));
    }
    let factors = state.factors();
    let id = Matrix::identity(state.dim);
    let above = factors[k..].iter().fold(id.clone(), |acc, f| f.matmul(&acc));
    let below = factors[..k - 1].iter().fold(id, |acc, f| f.matmul(&acc));
    let residual = above.matmul(&factors[k - 1]).matmul(&below).sub(&problem.b_target);
    Ok(above
        .transpose()
        .matmul(&residual)
        .matmul(&problem.sigma)
        .matmul(&below.transpose()))
}

/// All rescaled layer gradients `G_1 … G_N`, with prefix and suffix products
/// shared across layers.
pub fn all_layer_gradients<T: Scalar>(state: &FlowState<T>, problem: &RegressionProblem<T>) -> Result<Vec<Matrix<T>>> {
    check_shapes(state, problem)?;
    let factors = state.factors();
    let depth = factors.len();
    let id = Matrix::identity(state.dim);
    // below[i] = F_i ⋯ F_1 over the first i factors
    let mut below = Vec::with_capacity(depth + 1);
    below.push(id.clone());
    for f in &factors {
        let next = f.matmul(below.last().expect("non-empty"));
        below.push(next);
    }
    let residual = below[depth].sub(&problem.b_target);
    let rs = residual.matmul(&problem.sigma);
    let mut grads = vec![Matrix::zeros(0, 0); depth];
    // above = F_N ⋯ F_{i+2} while visiting layer index i
    let mut above = id;
    for i in (0..depth).rev() {
        grads[i] = above.transpose().matmul(&rs).matmul(&below[i].transpose());
        above = above.matmul(&factors[i]);
    }
    Ok(grads)
}

/// One sampled instant of a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample<T> {
    pub t: T,
    pub loss: T,
    pub max_theta_norm: T,
    pub max_theta_frobenius: T,
    pub smoothness_stat: T,
    pub state: FlowState<T>,
}

impl<T: Scalar> FlowSample<T> {
    fn capture(state: &FlowState<T>, problem: &RegressionProblem<T>) -> Result<Self> {
        Ok(Self {
            t: state.t,
            loss: loss(state, problem)?,
            max_theta_norm: state.max_layer_norm()?,
            max_theta_frobenius: state.max_layer_frobenius(),
            smoothness_stat: state.smoothness_stat()?,
            state: state.clone(),
        })
    }
}

/// Samples of a rescaled gradient flow `dθ_k/dt = −G_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace<T> {
    pub samples: Vec<FlowSample<T>>,
    pub problem: RegressionProblem<T>,
    pub dt: T,
}

impl<T: Scalar> FlowTrace<T> {
    pub fn depth(&self) -> usize {
        self.samples[0].state.depth()
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> &FlowState<T> {
        &self.samples.last().expect("trace has samples").state
    }

    /// Writes `t,loss,max_theta_norm,smoothness_stat`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "loss", "max_theta_norm", "smoothness_stat"])?;
        for s in &self.samples {
            w.write_record([
                s.t.to_string(),
                s.loss.to_string(),
                s.max_theta_norm.to_string(),
                s.smoothness_stat.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// `θ + a·k` applied layer by layer.
fn shifted<T: Scalar>(base: &[T], a: T, k: &[Matrix<T>], p: usize) -> Vec<T> {
    let mut out = base.to_vec();
    for (i, m) in k.iter().enumerate() {
        for (o, &v) in out[i * p..(i + 1) * p].iter_mut().zip(m.as_slice()) {
            *o = *o + a * v;
        }
    }
    out
}

/// Integrates the rescaled gradient flow from `state0` to `t_end` with
/// classical Runge-Kutta steps of size at most `dt`.
///
/// The trace holds samples at `t = 0`, at each of `snapshot_times` and at
/// `t_end`; step sizes are adjusted so every sample time is hit exactly. A
/// loss increase over any step beyond [`LOSS_INCREASE_TOLERANCE`] (relative)
/// aborts with [`Error::StepSize`].
pub fn integrate_flow<T: Scalar>(
    state0: &FlowState<T>,
    problem: &RegressionProblem<T>,
    t_end: T,
    dt: T,
    snapshot_times: &[T],
) -> Result<FlowTrace<T>> {
    check_shapes(state0, problem)?;
    if !(t_end > T::zero()) || !(dt > T::zero()) {
        return Err(Error::invalid("flow needs t_end > 0 and dt > 0"));
    }
    let mut stops: Vec<T> = snapshot_times.to_vec();
    if stops.iter().any(|&t| !(t >= T::zero() && t <= t_end)) {
        return Err(Error::invalid("snapshot times must lie in [0, t_end]"));
    }
    stops.push(t_end);
    stops.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    stops.dedup();
    stops.retain(|&t| t > T::zero());

    let p = state0.dim * state0.dim;
    let mut state = state0.clone();
    state.t = T::zero();
    let mut samples = vec![FlowSample::capture(&state, problem)?];
    let mut current_loss = samples[0].loss;
    let tol = T::c(LOSS_INCREASE_TOLERANCE);
    let two = T::c(2.0);
    let grads_at = |flat: Vec<T>| -> Result<Vec<Matrix<T>>> {
        let s = FlowState::from_schedule(state0.schedule.with_flat(&flat)?, state0.dim)?;
        all_layer_gradients(&s, problem)
    };
    let mut t = T::zero();
    for &stop in &stops {
        let span = stop - t;
        let steps = (span / dt).ceil().to_usize().unwrap_or(1).max(1);
        let h = span / T::from_count(steps);
        for j in 0..steps {
            let theta = state.schedule.flat().to_vec();
            let k1 = grads_at(theta.clone())?;
            let k2 = grads_at(shifted(&theta, -h / two, &k1, p))?;
            let k3 = grads_at(shifted(&theta, -h / two, &k2, p))?;
            let k4 = grads_at(shifted(&theta, -h, &k3, p))?;
            let mut next = theta;
            let w = h / T::c(6.0);
            for i in 0..k1.len() {
                let (a, b, c, d) = (k1[i].as_slice(), k2[i].as_slice(), k3[i].as_slice(), k4[i].as_slice());
                for q in 0..p {
                    let v = &mut next[i * p + q];
                    *v = *v - w * (a[q] + two * (b[q] + c[q]) + d[q]);
                }
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("flow parameters at t = {t:e}")));
            }
            state.schedule = state.schedule.with_flat(&next)?;
            let t_next = if j + 1 == steps { stop } else { t + h };
            state.t = t_next;
            let new_loss = loss(&state, problem)?;
            let slack = tol * current_loss + T::c(64.0) * T::epsilon() * current_loss.max(T::min_positive_value());
            if new_loss > current_loss + slack {
                return Err(Error::StepSize {
                    t: t_next.as_f64(),
                    before: current_loss.as_f64(),
                    after: new_loss.as_f64(),
                });
            }
            current_loss = new_loss;
            t = t_next;
        }
        samples.push(FlowSample::capture(&state, problem)?);
    }
    Ok(FlowTrace {
        samples,
        problem: problem.clone(),
        dt,
    })
}
