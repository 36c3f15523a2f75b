use crate::error::{check_dim, Error, Result};
use crate::numerics::Vector;
use crate::residual::{ResidualFamily, WeightSchedule};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    /// Linear interpolation of the residual values `f(·, θ_n)` and `f(·, θ_{n+1})`.
    ResidualInterp,
    /// The residual evaluated at linearly interpolated weights.
    WeightInterp,
    /// A field given directly as a function of `(x, s)`.
    Direct,
}

/// A time-dependent vector field `φ(x, s)` on `s ∈ [0, 1]`.
///
/// The field may be only piecewise smooth in `s`: it is smooth on each of
/// `segments()` equal sub-intervals of `[0, 1]`. Integrators pass the segment
/// index so a stage evaluated at an interval endpoint uses the piece the step
/// belongs to.
pub trait VectorField<T: Scalar> {
    fn dim(&self) -> usize;

    fn kind(&self) -> FieldKind;

    fn segments(&self) -> usize {
        1
    }

    /// Evaluates the smooth piece `segment`, extended to the closed interval.
    fn eval_in(&self, x: &[T], s: T, segment: usize) -> Vector<T>;

    fn eval(&self, x: &[T], s: T) -> Result<Vector<T>> {
        if !(s >= T::zero() && s <= T::one()) {
            return Err(Error::Domain(s.as_f64()));
        }
        check_dim("vector field state", self.dim(), x.len())?;
        Ok(self.eval_in(x, s, locate_segment(s, self.segments())))
    }
}

impl<T: Scalar, V: VectorField<T> + ?Sized> VectorField<T> for &V {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kind(&self) -> FieldKind {
        (**self).kind()
    }
    fn segments(&self) -> usize {
        (**self).segments()
    }
    fn eval_in(&self, x: &[T], s: T, segment: usize) -> Vector<T> {
        (**self).eval_in(x, s, segment)
    }
}

/// Snaps `u` to the nearest integer when it is within a few ulps of it.
#[inline]
fn snap<T: Scalar>(u: T) -> T {
    let r = u.round();
    if (u - r).abs() <= T::c(4.0) * T::epsilon() * u.abs().max(T::one()) {
        r
    } else {
        u
    }
}

/// Index of the piece containing `s` when `[0, 1]` is split into `segments`
/// equal parts. Grid points belong to the piece starting there, except `s = 1`.
pub fn locate_segment<T: Scalar>(s: T, segments: usize) -> usize {
    let u = snap(s * T::from_count(segments));
    let k = u.floor().to_usize().unwrap_or(0);
    k.min(segments.saturating_sub(1))
}

/// Position of `s` inside piece `n`, in `[0, 1]` up to rounding.
#[inline]
fn local_coordinate<T: Scalar>(s: T, depth: usize, n: usize) -> T {
    snap(s * T::from_count(depth)) - T::from_count(n)
}

/// Piecewise interpolation of a residual network in the depth variable.
#[derive(Debug, Clone)]
pub struct InterpolatedField<'a, T, F: ?Sized> {
    family: &'a F,
    schedule: &'a WeightSchedule<T>,
    kind: FieldKind,
}

impl<'a, T, F> InterpolatedField<'a, T, F>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    pub fn schedule(&self) -> &WeightSchedule<T> {
        self.schedule
    }

    pub fn family(&self) -> &F {
        self.family
    }
}

/// Builds the residual- or weight-interpolating field of `schedule`.
///
/// On `[n/N, (n+1)/N]` the field blends `θ_n` and `θ_{n+1}`, where the last
/// interval reads the terminal parameter of the schedule.
pub fn interpolate<'a, T, F>(
    family: &'a F,
    schedule: &'a WeightSchedule<T>,
    kind: FieldKind,
) -> Result<InterpolatedField<'a, T, F>>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    if kind == FieldKind::Direct {
        return Err(Error::invalid("interpolate needs residual_interp or weight_interp"));
    }
    check_dim("interpolate parameters", family.param_dim(), schedule.param_dim())?;
    Ok(InterpolatedField { family, schedule, kind })
}

impl<T, F> VectorField<T> for InterpolatedField<'_, T, F>
where
    T: Scalar,
    F: ResidualFamily<T> + ?Sized,
{
    fn dim(&self) -> usize {
        self.family.state_dim()
    }

    fn kind(&self) -> FieldKind {
        self.kind
    }

    fn segments(&self) -> usize {
        self.schedule.depth()
    }

    fn eval_in(&self, x: &[T], s: T, n: usize) -> Vector<T> {
        let depth = self.schedule.depth();
        let lam = local_coordinate(s, depth, n);
        let left = self.schedule.layer(n);
        if lam == T::zero() {
            return self.family.eval(x, left);
        }
        let right = self.schedule.extended(n + 1);
        let w = T::one() - lam;
        match self.kind {
            FieldKind::WeightInterp => {
                let theta: Vec<T> = left.iter().zip(right).map(|(&a, &b)| w * a + lam * b).collect();
                self.family.eval(x, &theta)
            }
            _ => {
                let a = self.family.eval(x, left);
                let b = self.family.eval(x, right);
                a.iter().zip(b.iter()).map(|(&p, &q)| w * p + lam * q).collect()
            }
        }
    }
}

/// A field defined by a closure `(x, s, segment) -> φ`.
pub struct FnField<T, G> {
    dim: usize,
    segments: usize,
    g: G,
    _marker: std::marker::PhantomData<fn() -> T>,
}

impl<T, G> FnField<T, G>
where
    T: Scalar,
    G: Fn(&[T], T, usize) -> Vector<T>,
{
    pub fn new(dim: usize, g: G) -> Self {
        Self::piecewise(dim, 1, g)
    }

    /// A field smooth on each of `segments` equal pieces of `[0, 1]`.
    pub fn piecewise(dim: usize, segments: usize, g: G) -> Self {
        assert!(segments >= 1, "a field needs at least one segment");
        Self {
            dim,
            segments,
            g,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<T, G> VectorField<T> for FnField<T, G>
where
    T: Scalar,
    G: Fn(&[T], T, usize) -> Vector<T>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Direct
    }

    fn segments(&self) -> usize {
        self.segments
    }

    fn eval_in(&self, x: &[T], s: T, segment: usize) -> Vector<T> {
        (self.g)(x, s, segment)
    }
}
