use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::scalar::Scalar;

/// Denominator floor for relative gradient errors.
pub const RELATIVE_FLOOR: f64 = 1e-15;

/// Parameter and state gradients of a scalar loss through a residual chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    /// `∇_{θ_n} L` for `n = 0..N`.
    pub param_grads: Vec<Vector<T>>,
    /// `∇_{x_n} L` for `n = 0..=N`.
    pub state_grads: Vec<Vector<T>>,
    /// Gradient with respect to an explicit terminal parameter `θ_N`, when the
    /// schedule carries one and the scheme reads it (Heun).
    pub terminal_grad: Option<Vector<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn depth(&self) -> usize {
        self.param_grads.len()
    }

    /// `∇_{x_0} L`.
    pub fn input_grad(&self) -> &Vector<T> {
        &self.state_grads[0]
    }

    /// All parameter gradients, concatenated in layer order.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out: Vec<T> = self.param_grads.iter().flat_map(|g| g.iter().copied()).collect();
        if let Some(t) = &self.terminal_grad {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.param_grads.iter().chain(&self.state_grads).all(|g| g.is_finite())
            && self.terminal_grad.as_ref().is_none_or(|g| g.is_finite())
    }
}

/// Receives the results of a reverse sweep as they are produced.
///
/// Layers and nodes arrive in decreasing index order. Implementations that
/// keep nothing let a sweep run in memory independent of depth.
pub trait GradientSink<T> {
    fn param_grad(&mut self, layer: usize, grad: &Vector<T>);

    fn state_grad(&mut self, _node: usize, _state: &Vector<T>, _grad: &Vector<T>) {}

    fn terminal_grad(&mut self, _grad: &Vector<T>) {}
}

/// Collects a sweep into a [`GradientSet`].
#[derive(Debug)]
pub(crate) struct Collector<T> {
    params: Vec<Option<Vector<T>>>,
    states: Vec<Option<Vector<T>>>,
    terminal: Option<Vector<T>>,
}

impl<T: Scalar> Collector<T> {
    pub(crate) fn new(depth: usize) -> Self {
        Self {
            params: vec![None; depth],
            states: vec![None; depth + 1],
            terminal: None,
        }
    }

    pub(crate) fn finish(self) -> GradientSet<T> {
        GradientSet {
            param_grads: self
                .params
                .into_iter()
                .map(|g| g.expect("every layer emitted"))
                .collect(),
            state_grads: self
                .states
                .into_iter()
                .map(|g| g.expect("every node emitted"))
                .collect(),
            terminal_grad: self.terminal,
        }
    }
}

impl<T: Scalar> GradientSink<T> for Collector<T> {
    fn param_grad(&mut self, layer: usize, grad: &Vector<T>) {
        self.params[layer] = Some(grad.clone());
    }

    fn state_grad(&mut self, node: usize, _state: &Vector<T>, grad: &Vector<T>) {
        self.states[node] = Some(grad.clone());
    }

    fn terminal_grad(&mut self, grad: &Vector<T>) {
        self.terminal = Some(grad.clone());
    }
}

/// Per-layer distance between an approximate and an exact gradient set.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientComparison<T> {
    pub per_layer_abs: Vec<T>,
    pub per_layer_rel: Vec<T>,
    pub max_abs: T,
    pub max_rel: T,
}

pub fn compare_gradients<T: Scalar>(exact: &GradientSet<T>, approx: &GradientSet<T>) -> Result<GradientComparison<T>> {
    if exact.depth() != approx.depth() {
        return Err(Error::DimensionMismatch {
            context: "compare_gradients depth",
            expected: exact.depth(),
            found: approx.depth(),
        });
    }
    let floor = T::c(RELATIVE_FLOOR);
    let mut per_layer_abs = Vec::with_capacity(exact.depth());
    let mut per_layer_rel = Vec::with_capacity(exact.depth());
    for (e, a) in exact.param_grads.iter().zip(&approx.param_grads) {
        if e.dim() != a.dim() {
            return Err(Error::DimensionMismatch {
                context: "compare_gradients layer",
                expected: e.dim(),
                found: a.dim(),
            });
        }
        let abs = a.sub(e).norm();
        per_layer_abs.push(abs);
        per_layer_rel.push(abs / e.norm().max(floor));
    }
    let max = |v: &[T]| v.iter().fold(T::zero(), |m, &x| m.max(x));
    Ok(GradientComparison {
        max_abs: max(&per_layer_abs),
        max_rel: max(&per_layer_rel),
        per_layer_abs,
        per_layer_rel,
    })
}

impl<T: Scalar> GradientComparison<T> {
    /// Writes `layer,abs_err,rel_err` rows followed by a `max` summary row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["layer", "abs_err", "rel_err"])?;
        for (n, (a, r)) in self.per_layer_abs.iter().zip(&self.per_layer_rel).enumerate() {
            w.write_record([n.to_string(), a.to_string(), r.to_string()])?;
        }
        w.write_record(["max".to_string(), self.max_abs.to_string(), self.max_rel.to_string()])?;
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}
