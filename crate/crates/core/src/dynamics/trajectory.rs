use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::scalar::Scalar;

/// States whose norm exceeds this abort a chain with a layer-indexed error.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Euler,
    Heun,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Heun => "heun",
        }
    }
}

/// Nodes `x₀ … x_N` of a residual chain, plus the Heun midpoints
/// `y₀ … y_{N−1}` when the chain uses Heun steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub scheme: Scheme,
    pub nodes: Vec<Vector<T>>,
    pub midpoints: Option<Vec<Vector<T>>>,
}

impl<T: Scalar> Trajectory<T> {
    pub(crate) fn new(scheme: Scheme, nodes: Vec<Vector<T>>, midpoints: Option<Vec<Vector<T>>>) -> Self {
        debug_assert_eq!(midpoints.is_some(), scheme == Scheme::Heun);
        if let Some(m) = &midpoints {
            debug_assert_eq!(m.len() + 1, nodes.len());
        }
        Self {
            scheme,
            nodes,
            midpoints,
        }
    }

    pub fn depth(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.nodes[0].dim()
    }

    pub fn output(&self) -> &Vector<T> {
        self.nodes.last().expect("trajectory has at least one node")
    }

    /// Largest node norm, the trajectory's extent.
    pub fn extent(&self) -> T {
        self.nodes.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }

    /// Writes `node_index,s,x_0,...,x_{d-1}`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["node_index".to_string(), "s".to_string()];
        header.extend((0..self.state_dim()).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        let depth = self.depth();
        for (n, x) in self.nodes.iter().enumerate() {
            let s = n as f64 / depth.max(1) as f64;
            let mut rec = vec![n.to_string(), s.to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Rejects non-finite states and states beyond [`DIVERGENCE_THRESHOLD`].
#[inline]
pub(crate) fn check_state<T: Scalar>(layer: usize, x: &[T]) -> Result<()> {
    let n = crate::numerics::norm(x);
    if !n.is_finite() || n > T::c(DIVERGENCE_THRESHOLD) {
        return Err(Error::Divergence {
            layer,
            norm: n.as_f64(),
        });
    }
    Ok(())
}
