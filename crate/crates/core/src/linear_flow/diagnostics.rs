use std::io::Write;

use crate::dynamics::{solve_ode_oracle, FnField};
use crate::error::{Error, Result};
use crate::numerics::random::{rng_from_seed, unit_vector};
use crate::numerics::{distance, fit_loglog_slope, Matrix, SlopeFit, Vector};
use crate::scalar::Scalar;

use super::flow::{loss, FlowState, FlowTrace};
use super::problem::{build_problem, RegressionProblem};

/// Layer-norm ceiling required at initialisation.
pub const INIT_NORM_LIMIT: f64 = 0.25;
/// Layer-norm ceiling guaranteed along the flow.
pub const FLOW_NORM_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Report<T> {
    pub passes: bool,
    /// `m/(4√(2Me³)) − √ℓ(0)`; positive when the loss condition holds.
    pub loss_margin: T,
    /// `1/4 − max_k ‖θ_k‖` in spectral norm; nonnegative when the norm condition holds.
    pub norm_margin: T,
    pub loss: T,
    pub loss_root_threshold: T,
    pub max_norm: T,
    pub max_norm_frobenius: T,
}

/// Checks the small-initial-loss and small-initial-weight conditions.
pub fn check_assumption1<T: Scalar>(
    state: &FlowState<T>,
    problem: &RegressionProblem<T>,
) -> Result<Assumption1Report<T>> {
    let l = loss(state, problem)?;
    let threshold = problem.loss_root_threshold();
    let max_norm = state.max_layer_norm()?;
    let loss_margin = threshold - l.sqrt();
    let norm_margin = T::c(INIT_NORM_LIMIT) - max_norm;
    Ok(Assumption1Report {
        passes: loss_margin > T::zero() && norm_margin >= T::zero(),
        loss_margin,
        norm_margin,
        loss: l,
        loss_root_threshold: threshold,
        max_norm,
        max_norm_frobenius: state.max_layer_frobenius(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport<T> {
    /// `max_t max_k ‖θ_k(t)‖`.
    pub max_theta_norm: T,
    /// `max_t N·max_k ‖θ_{k+1}(t) − θ_k(t)‖`.
    pub max_smoothness: T,
    pub initial_smoothness: T,
    /// `max_t ℓ(t) / (e^{−(2/e) m t} ℓ(0))`.
    pub max_decay_ratio: T,
    pub norms_ok: bool,
    pub decay_ok: bool,
    pub smoothness_ok: bool,
    pub violations: Vec<String>,
}

impl<T> InvariantReport<T> {
    pub fn all_ok(&self) -> bool {
        self.norms_ok && self.decay_ok && self.smoothness_ok
    }
}

/// Evaluates the weight-norm, loss-decay and smoothness monitors over every
/// sample of `trace`. Violations are reported, never raised.
///
/// The decay check allows a relative slack of `decay_tolerance`; the
/// smoothness statistic may grow to ten times its initial value.
pub fn monitor_invariants<T: Scalar>(trace: &FlowTrace<T>, decay_tolerance: T) -> InvariantReport<T> {
    let rate = trace.problem.decay_rate();
    let first = &trace.samples[0];
    let l0 = first.loss;
    let mut max_theta_norm = T::zero();
    let mut max_smoothness = T::zero();
    let mut max_decay_ratio = T::zero();
    let mut violations = Vec::new();
    let limit = T::c(FLOW_NORM_LIMIT);
    let smooth_cap = T::c(10.0) * first.smoothness_stat + T::c(1e-10);
    for s in &trace.samples {
        max_theta_norm = max_theta_norm.max(s.max_theta_norm);
        max_smoothness = max_smoothness.max(s.smoothness_stat);
        let envelope = (-rate * s.t).exp() * l0;
        let ratio = if envelope > T::zero() {
            s.loss / envelope
        } else if s.loss == T::zero() {
            T::zero()
        } else {
            T::infinity()
        };
        max_decay_ratio = max_decay_ratio.max(ratio);
        if s.max_theta_norm >= limit {
            violations.push(format!("t={}: max layer norm {:e} >= 1/2", s.t, s.max_theta_norm));
        }
        if ratio > T::one() + decay_tolerance {
            violations.push(format!(
                "t={}: loss {:e} above decay envelope (ratio {ratio:e})",
                s.t, s.loss
            ));
        }
        if s.smoothness_stat > smooth_cap {
            violations.push(format!(
                "t={}: smoothness statistic {:e} exceeds 10x initial",
                s.t, s.smoothness_stat
            ));
        }
    }
    InvariantReport {
        norms_ok: max_theta_norm < limit,
        decay_ok: max_decay_ratio <= T::one() + decay_tolerance,
        smoothness_ok: max_smoothness <= smooth_cap,
        max_theta_norm,
        max_smoothness,
        initial_smoothness: first.smoothness_stat,
        max_decay_ratio,
        violations,
    }
}

fn same_times<T: Scalar>(a: &FlowTrace<T>, b: &FlowTrace<T>) -> Result<()> {
    let (ta, tb) = (a.times(), b.times());
    let scale = ta.last().copied().unwrap_or(T::one()).max(T::one());
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(&x, &y)| (x - y).abs() > T::c(1e-12) * scale) {
        return Err(Error::invalid("traces are sampled at different times"));
    }
    Ok(())
}

/// `max_{t, k} ‖θ_k^N(t) − θ_{2k}^{2N}(t)‖` in spectral norm.
pub fn depth_double_compare<T: Scalar>(trace_n: &FlowTrace<T>, trace_2n: &FlowTrace<T>) -> Result<T> {
    let n = trace_n.depth();
    if trace_2n.depth() != 2 * n {
        return Err(Error::invalid(format!("depth {} is not twice {n}", trace_2n.depth())));
    }
    same_times(trace_n, trace_2n)?;
    let mut worst = T::zero();
    for (a, b) in trace_n.samples.iter().zip(&trace_2n.samples) {
        for k in 1..=n {
            worst = worst.max(a.state.layer(k).sub(&b.state.layer(2 * k)).spectral_norm()?);
        }
    }
    Ok(worst)
}

/// `L²` distance over `s ∈ [0, 1]` between the staircase weight functions
/// `ψ(s) = θ_{⌈Ns⌉}` of two states, in Frobenius norm. One depth must divide
/// the other.
pub fn psi_l2_distance<T: Scalar>(a: &FlowState<T>, b: &FlowState<T>) -> Result<T> {
    let (na, nb) = (a.depth(), b.depth());
    let fine = na.max(nb);
    if fine % na != 0 || fine % nb != 0 || a.dim != b.dim {
        return Err(Error::invalid(format!("depths {na} and {nb} have no common grid")));
    }
    let sa = a.schedule.flat();
    let sb = b.schedule.flat();
    let p = a.dim * a.dim;
    let mut sum = T::zero();
    for j in 1..=fine {
        // piece ((j−1)/fine, j/fine] lies in layer ⌈j·n/fine⌉
        let ia = (j * na).div_ceil(fine) - 1;
        let ib = (j * nb).div_ceil(fine) - 1;
        let d = distance(&sa[ia * p..(ia + 1) * p], &sb[ib * p..(ib + 1) * p]);
        sum = sum + d * d;
    }
    Ok((sum / T::from_count(fine)).sqrt())
}

/// Distances of each trace's weight function to a reference trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitMap<T> {
    pub times: Vec<T>,
    pub depths: Vec<usize>,
    pub reference_depth: usize,
    /// `distances[i][j]` at `times[i]` and `depths[j]`.
    pub distances: Vec<Vec<T>>,
    /// Log-log fit of distance against depth at each time, when defined.
    pub slopes: Vec<Option<SlopeFit<T>>>,
    /// `sup_t` distance per depth.
    pub sup_distances: Vec<T>,
    pub sup_slope: Option<SlopeFit<T>>,
}

impl<T: Scalar> LimitMap<T> {
    /// Whether distances shrink with depth at every time, up to a relative slack.
    pub fn is_nonincreasing(&self, slack: T) -> bool {
        self.distances
            .iter()
            .all(|row| row.windows(2).all(|w| w[1] <= w[0] * (T::one() + slack)))
    }

    /// Writes `t,N,l2_distance`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "N", "l2_distance"])?;
        for (t, row) in self.times.iter().zip(&self.distances) {
            for (n, d) in self.depths.iter().zip(row) {
                w.write_record([t.to_string(), n.to_string(), d.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

fn fit_or_none<T: Scalar>(points: &[(usize, T)]) -> Option<SlopeFit<T>> {
    if points.len() < 2 || points.iter().any(|&(_, v)| !(v > T::zero())) {
        return None;
    }
    fit_loglog_slope(points).ok()
}

/// Compares each trace with the deepest one, which serves as the reference.
/// Traces must be sorted by increasing depth and share their sample times.
pub fn extract_limit_map<T: Scalar>(traces: &[FlowTrace<T>]) -> Result<LimitMap<T>> {
    if traces.len() < 2 {
        return Err(Error::invalid("a limit map needs at least two traces"));
    }
    let (reference, rest) = traces.split_last().expect("len >= 2");
    if rest.windows(2).any(|w| w[0].depth() >= w[1].depth())
        || rest.last().expect("non-empty").depth() >= reference.depth()
    {
        return Err(Error::invalid("traces must have strictly increasing depth"));
    }
    for tr in rest {
        same_times(tr, reference)?;
    }
    let times = reference.times();
    let depths: Vec<usize> = rest.iter().map(FlowTrace::depth).collect();
    let mut distances = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let row = rest
            .iter()
            .map(|tr| psi_l2_distance(&tr.samples[i].state, &reference.samples[i].state))
            .collect::<Result<Vec<T>>>()?;
        distances.push(row);
    }
    let slopes = distances
        .iter()
        .map(|row| fit_or_none(&depths.iter().copied().zip(row.iter().copied()).collect::<Vec<_>>()))
        .collect();
    let sup_distances: Vec<T> = (0..depths.len())
        .map(|j| distances.iter().fold(T::zero(), |m, row| m.max(row[j])))
        .collect();
    let sup_slope = fit_or_none(
        &depths
            .iter()
            .copied()
            .zip(sup_distances.iter().copied())
            .collect::<Vec<_>>(),
    );
    Ok(LimitMap {
        times,
        depths,
        reference_depth: reference.depth(),
        distances,
        slopes,
        sup_distances,
        sup_slope,
    })
}

/// Maximum over `probes` random unit vectors of `‖Π x₀ − x(1)‖`, where `x`
/// solves `ẋ = ψ(s) x` for the staircase weight function `ψ(s) = θ_{⌈Ns⌉}`.
pub fn product_vs_ode<T: Scalar>(state: &FlowState<T>, probes: usize, seed: u64) -> Result<T> {
    let depth = state.depth();
    let layers: Vec<Matrix<T>> = (1..=depth).map(|k| state.layer(k)).collect();
    let field = FnField::piecewise(state.dim, depth, |x: &[T], _s, seg| layers[seg].mul_vec(x));
    let pi = state.product();
    let mut rng = rng_from_seed(seed);
    let mut worst = T::zero();
    for _ in 0..probes {
        let x0: Vector<T> = unit_vector(&mut rng, state.dim);
        let sol = solve_ode_oracle(&field, &x0, 64 * depth)?;
        worst = worst.max(distance(&pi.mul_vec(&x0), sol.final_state()));
    }
    Ok(worst)
}

/// Flow map `X(1)` of `Ẋ = g(s) X`, `X(0) = I`, by Runge-Kutta with `steps` steps.
pub fn profile_flow_map<T: Scalar>(dim: usize, g: impl Fn(T) -> Matrix<T>, steps: usize) -> Result<Matrix<T>> {
    let field = FnField::new(dim * dim, |x: &[T], s, _| {
        let xm = Matrix::from_row_major(dim, dim, x.to_vec()).expect("state is d×d");
        Vector::from(g(s).matmul(&xm).into_vec())
    });
    let id = Matrix::<T>::identity(dim);
    let sol = solve_ode_oracle(&field, id.as_slice(), steps)?;
    Matrix::from_row_major(dim, dim, sol.final_state().as_slice().to_vec())
}

/// Builds a problem whose target sits at `Σ`-distance `ε` from `base` along
/// `direction`, with `ε²` equal to `loss_fraction` times the admissible
/// initial loss.
///
/// With `base` the product of the initial layers the initial loss is exactly
/// `ε²`; with `base` the continuum flow map of a weight profile one target
/// serves networks of every depth.
pub fn compliant_problem<T: Scalar>(
    sigma: Matrix<T>,
    base: &Matrix<T>,
    direction: &Matrix<T>,
    loss_fraction: T,
) -> Result<RegressionProblem<T>> {
    if !(loss_fraction > T::zero() && loss_fraction < T::one()) {
        return Err(Error::invalid("loss fraction must lie in (0, 1)"));
    }
    let probe = build_problem(sigma, base.clone())?;
    let norm = probe.sigma_norm_sq(direction).sqrt();
    if !(norm > T::zero()) {
        return Err(Error::invalid("target direction has zero Σ-norm"));
    }
    let eps = loss_fraction.sqrt() * probe.loss_root_threshold();
    let b = base.add(&direction.scale(eps / norm));
    build_problem(probe.sigma, b)
}
