//! Three networks whose distance to their interpolating ODE is known in
//! closed form.

use std::io::Write;
use std::path::Path;

use odenet_core::dynamics::{approximation_error, forward_euler_chain, interpolate, solve_ode_oracle, FieldKind};
use odenet_core::numerics::Vector;
use odenet_core::residual::{
    make_alternating_sign_schedule, make_index_schedule, make_offset_family, make_square_family, ResidualFamily,
    WeightSchedule,
};

use crate::error::{io_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TightnessCase {
    /// `φ(x, s) = s` through `θ_n = n/N`: gap `1/(2N)`.
    LinearInTime,
    /// `θ_n = n` on the offset family with residual interpolation: gap `1/2`.
    IndexWeights,
    /// `θ_n = (−1)^n` on `f(x, θ) = θ²` with weight interpolation: gap `2/3`.
    AlternatingSquare,
}

impl TightnessCase {
    pub const ALL: [Self; 3] = [Self::LinearInTime, Self::IndexWeights, Self::AlternatingSquare];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::LinearInTime => "linear_in_time",
            Self::IndexWeights => "index_weights",
            Self::AlternatingSquare => "alternating_square",
        }
    }

    pub fn analytic_gap(self, depth: usize) -> f64 {
        match self {
            Self::LinearInTime => 1.0 / (2.0 * depth as f64),
            Self::IndexWeights => 0.5,
            Self::AlternatingSquare => 2.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessRow {
    pub case: TightnessCase,
    pub depth: usize,
    pub measured: f64,
    pub analytic: f64,
}

/// `|x_N − x(1)|` for one case, with the ODE solved by Runge-Kutta on a grid
/// of `4N` steps (exact for these piecewise-polynomial fields).
pub fn measure_gap(case: TightnessCase, depth: usize) -> Result<f64> {
    let (family, schedule, kind): (Box<dyn ResidualFamily<f64>>, WeightSchedule<f64>, FieldKind) = match case {
        TightnessCase::LinearInTime => {
            let s = WeightSchedule::from_fn(depth, 1, |n| Vector::from_slice(&[n as f64 / depth as f64]))?
                .with_terminal(Vector::from_slice(&[1.0]))?;
            (Box::new(make_offset_family(1)?), s, FieldKind::ResidualInterp)
        }
        TightnessCase::IndexWeights => (
            Box::new(make_offset_family(1)?),
            make_index_schedule(depth)?,
            FieldKind::ResidualInterp,
        ),
        TightnessCase::AlternatingSquare => (
            Box::new(make_square_family()),
            make_alternating_sign_schedule(depth)?,
            FieldKind::WeightInterp,
        ),
    };
    let x0 = [0.0];
    let traj = forward_euler_chain(family.as_ref(), &schedule, &x0)?;
    let field = interpolate(family.as_ref(), &schedule, kind)?;
    let sol = solve_ode_oracle(&field, &x0, 4 * depth)?;
    let err = approximation_error(&traj, &sol)?;
    Ok(*err.per_node.last().expect("chain has nodes"))
}

pub fn run_tightness_suite(depths: &[usize]) -> Result<Vec<TightnessRow>> {
    let mut rows = Vec::new();
    for case in TightnessCase::ALL {
        for &depth in depths {
            rows.push(TightnessRow {
                case,
                depth,
                measured: measure_gap(case, depth)?,
                analytic: case.analytic_gap(depth),
            });
        }
    }
    Ok(rows)
}

/// Writes `case,N,measured,analytic,abs_diff`.
pub fn write_tightness_csv<W: Write>(rows: &[TightnessRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["case", "N", "measured", "analytic", "abs_diff"])
        .map_err(odenet_core::Error::from)?;
    for r in rows {
        w.write_record([
            r.case.as_str().to_string(),
            r.depth.to_string(),
            r.measured.to_string(),
            r.analytic.to_string(),
            (r.measured - r.analytic).abs().to_string(),
        ])
        .map_err(odenet_core::Error::from)?;
    }
    w.flush().map_err(io_err("tightness.csv"))?;
    Ok(())
}

pub fn write_tightness(rows: &[TightnessRow], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("tightness.csv");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    write_tightness_csv(rows, file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_match_closed_forms() {
        for depth in [1, 3, 10, 100] {
            for case in TightnessCase::ALL {
                let got = measure_gap(case, depth).unwrap();
                let want = match case {
                    TightnessCase::LinearInTime => 0.5 / depth as f64,
                    TightnessCase::IndexWeights => 0.5,
                    TightnessCase::AlternatingSquare => 2.0 / 3.0,
                };
                assert!((got - want).abs() < 1e-9, "{case:?} N={depth}: {got}");
            }
        }
    }

    #[test]
    fn csv_layout() {
        let rows = run_tightness_suite(&[2]).unwrap();
        let mut buf = Vec::new();
        write_tightness_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("case,N,measured,analytic,abs_diff\nlinear_in_time,2,0.25,0.25,"));
        assert_eq!(text.lines().count(), 4);
    }
}
