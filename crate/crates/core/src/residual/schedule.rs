use std::io::{Read, Write};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{norm, Vector};
use crate::scalar::Scalar;

/// Depth-indexed parameters `θ₀ … θ_{N−1}` of one network of depth `N`.
///
/// Heun steps and the interpolating fields also read a terminal parameter
/// `θ_N`. When none is set explicitly, `θ_N = θ_{N−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule<T> {
    depth: usize,
    param_dim: usize,
    data: Vec<T>,
    terminal: Option<Vec<T>>,
}

impl<T: Scalar> WeightSchedule<T> {
    pub fn new(params: Vec<Vector<T>>) -> Result<Self> {
        let depth = params.len();
        if depth == 0 {
            return Err(Error::invalid("schedule depth must be >= 1"));
        }
        let param_dim = params[0].dim();
        let mut data = Vec::with_capacity(depth * param_dim);
        for p in &params {
            check_dim("WeightSchedule::new", param_dim, p.dim())?;
            p.ensure_finite("schedule parameter")?;
            data.extend_from_slice(p);
        }
        Ok(Self {
            depth,
            param_dim,
            data,
            terminal: None,
        })
    }

    pub fn from_fn(depth: usize, param_dim: usize, mut f: impl FnMut(usize) -> Vector<T>) -> Result<Self> {
        let params: Vec<Vector<T>> = (0..depth).map(&mut f).collect();
        if let Some(p) = params.first() {
            check_dim("WeightSchedule::from_fn", param_dim, p.dim())?;
        }
        Self::new(params)
    }

    pub fn constant(depth: usize, theta: &[T]) -> Result<Self> {
        Self::from_fn(depth, theta.len(), |_| Vector::from_slice(theta))
    }

    /// Sets an explicit terminal parameter `θ_N`.
    pub fn with_terminal(mut self, theta: Vector<T>) -> Result<Self> {
        check_dim("WeightSchedule::with_terminal", self.param_dim, theta.dim())?;
        theta.ensure_finite("terminal parameter")?;
        self.terminal = Some(theta.into_vec());
        Ok(self)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn has_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    pub fn terminal(&self) -> Option<&[T]> {
        self.terminal.as_deref()
    }

    /// `θ_n` for `n < N`.
    #[inline]
    pub fn layer(&self, n: usize) -> &[T] {
        assert!(n < self.depth, "layer {n} out of range for depth {}", self.depth);
        &self.data[n * self.param_dim..(n + 1) * self.param_dim]
    }

    pub fn layer_mut(&mut self, n: usize) -> &mut [T] {
        assert!(n < self.depth, "layer {n} out of range for depth {}", self.depth);
        &mut self.data[n * self.param_dim..(n + 1) * self.param_dim]
    }

    /// `θ_n` for `n ≤ N`, resolving `θ_N` to the terminal parameter or, when
    /// absent, to `θ_{N−1}`.
    #[inline]
    pub fn extended(&self, n: usize) -> &[T] {
        if n == self.depth {
            match &self.terminal {
                Some(t) => t,
                None => self.layer(n - 1),
            }
        } else {
            self.layer(n)
        }
    }

    pub fn layers(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.param_dim)
    }

    pub fn flat(&self) -> &[T] {
        &self.data
    }

    /// Rebuilds a schedule of the same shape (and terminal) from flat layer data.
    pub fn with_flat(&self, flat: &[T]) -> Result<Self> {
        check_dim("WeightSchedule::with_flat", self.data.len(), flat.len())?;
        Ok(Self {
            depth: self.depth,
            param_dim: self.param_dim,
            data: flat.to_vec(),
            terminal: self.terminal.clone(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
            && self.terminal.as_ref().is_none_or(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Writes `layer,p0,p1,...` with one row per layer; an explicit terminal
    /// parameter is written as a final row with `layer = N`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["layer".to_string()];
        header.extend((0..self.param_dim).map(|i| format!("p{i}")));
        w.write_record(&header)?;
        let rows = self.depth + usize::from(self.terminal.is_some());
        for n in 0..rows {
            let mut rec = vec![n.to_string()];
            rec.extend(self.extended(n).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    /// Reads every row as a layer. Use [`Self::read_csv_with_depth`] to
    /// recover a terminal row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("layer") {
            return Err(Error::Csv("first column must be `layer`".into()));
        }
        let param_dim = headers.len() - 1;
        for (i, h) in headers.iter().skip(1).enumerate() {
            if h != format!("p{i}") {
                return Err(Error::Csv(format!("unexpected column `{h}`")));
            }
        }
        let mut rows: Vec<Vector<T>> = Vec::new();
        for (expected, rec) in r.records().enumerate() {
            let rec = rec?;
            let layer: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Csv(format!("bad layer index `{}`", &rec[0])))?;
            if layer != expected {
                return Err(Error::Csv(format!("expected layer {expected}, found {layer}")));
            }
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map(T::c)
                        .map_err(|_| Error::Csv(format!("bad value `{s}`")))
                })
                .collect::<Result<Vec<T>>>()?;
            check_dim("schedule csv row", param_dim, vals.len())?;
            rows.push(Vector::from(vals));
        }
        Self::new(rows)
    }

    /// Reads a schedule of known depth; a row `layer = depth` becomes the
    /// terminal parameter.
    pub fn read_csv_with_depth<R: Read>(reader: R, depth: usize) -> Result<Self> {
        let all = Self::read_csv(reader)?;
        match all.depth {
            n if n == depth => Ok(all),
            n if n == depth + 1 => {
                let terminal = Vector::from_slice(all.layer(depth));
                let head = Self {
                    depth,
                    param_dim: all.param_dim,
                    data: all.data[..depth * all.param_dim].to_vec(),
                    terminal: None,
                };
                head.with_terminal(terminal)
            }
            n => Err(Error::Csv(format!("expected {depth} or {} rows, found {n}", depth + 1))),
        }
    }
}

/// `θ_n = n` for the state-independent family `f(x, θ) = θ`, with the
/// sequence continued to `θ_N = N`.
pub fn make_index_schedule<T: Scalar>(depth: usize) -> Result<WeightSchedule<T>> {
    WeightSchedule::from_fn(depth, 1, |n| Vector::from(vec![T::from_count(n)]))?
        .with_terminal(Vector::from(vec![T::from_count(depth)]))
}

/// Scalar `θ_n = (−1)ⁿ`, continued to `θ_N = (−1)^N`.
pub fn make_alternating_sign_schedule<T: Scalar>(depth: usize) -> Result<WeightSchedule<T>> {
    let sign = |n: usize| if n.is_multiple_of(2) { T::one() } else { -T::one() };
    WeightSchedule::from_fn(depth, 1, |n| Vector::from(vec![sign(n)]))?.with_terminal(Vector::from(vec![sign(depth)]))
}

/// `Δ_θ = max_n ‖θ_{n+1} − θ_n‖²` over consecutive layers.
pub fn weight_smoothness<T: Scalar>(schedule: &WeightSchedule<T>) -> Result<T> {
    if schedule.depth() < 2 {
        return Err(Error::UndefinedStatistic("weight smoothness needs depth >= 2"));
    }
    let mut worst = T::zero();
    let mut diff = vec![T::zero(); schedule.param_dim()];
    for n in 0..schedule.depth() - 1 {
        for ((d, &a), &b) in diff.iter_mut().zip(schedule.layer(n + 1)).zip(schedule.layer(n)) {
            *d = a - b;
        }
        let g = norm(&diff);
        worst = worst.max(g * g);
    }
    Ok(worst)
}
