//! Depth sweeps of approximation, reconstruction and gradient errors with
//! log-log slope fits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use odenet_core::adjoint::{
    backprop_adjoint, backprop_exact_for, compare_gradients, quadratic_output_loss, reconstruct_backward_euler,
    reconstruct_backward_heun,
};
use odenet_core::dynamics::{
    approximation_error, forward_chain, forward_euler_chain, interpolate, solve_ode_default, Scheme,
};
use odenet_core::numerics::random::{gaussian_vector, rng_from_seed};
use odenet_core::numerics::{fit_loglog_slope, noise_floor, SlopeFit, Vector};
use odenet_core::residual::{
    make_linear_family, make_mlp_family, make_offset_family, make_square_family, make_zero_family, ResidualFamily,
    WeightSchedule,
};
use odenet_core::Error;

use crate::config::{Experiment, ExperimentConfig, FamilyKind};
use crate::error::{io_err, HarnessError, Result};
use crate::profiles::{Profile, ProfileKind};

pub const APPROX_ERROR: &str = "approx_error";
pub const RECONSTRUCTION_ERROR: &str = "reconstruction_max_error";
pub const GRADIENT_ABS_ERROR: &str = "gradient_max_abs_error";
pub const GRADIENT_REL_ERROR: &str = "gradient_max_rel_error";

pub fn build_family(cfg: &ExperimentConfig) -> Result<Box<dyn ResidualFamily<f64>>> {
    let d = cfg.dim;
    Ok(match cfg.family {
        FamilyKind::Mlp => Box::new(make_mlp_family(d, cfg.hidden)?),
        FamilyKind::Linear => Box::new(make_linear_family(d)?),
        FamilyKind::Offset => Box::new(make_offset_family(d)?),
        FamilyKind::Square => {
            if d != 1 {
                return Err(HarnessError::config(
                    "the square family is one-dimensional; set dim = 1",
                ));
            }
            Box::new(make_square_family())
        }
        FamilyKind::Zero => Box::new(make_zero_family(d, d)?),
    })
}

/// Value recorded for one `(depth, metric)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordValue {
    Value(f64),
    /// Below the rounding floor of the measured quantity; excluded from fits.
    Floor(f64),
    Diverged,
}

impl RecordValue {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) | Self::Floor(v) => Some(v),
            Self::Diverged => None,
        }
    }

    fn csv_field(self) -> String {
        match self {
            Self::Value(v) => v.to_string(),
            Self::Floor(_) => "floor".into(),
            Self::Diverged => "diverged".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub depth: usize,
    pub metric: &'static str,
    pub value: RecordValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSlope {
    pub metric: &'static str,
    pub fit: Option<SlopeFit<f64>>,
    pub low_confidence: bool,
}

impl MetricSlope {
    pub fn flag(&self) -> &'static str {
        match (&self.fit, self.low_confidence) {
            (None, _) => "insufficient_points",
            (Some(_), true) => "low_confidence",
            (Some(_), false) => "ok",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthGradients {
    pub depth: usize,
    pub csv: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub experiment: Experiment,
    pub records: Vec<StudyRecord>,
    pub slopes: Vec<MetricSlope>,
    pub diverged: Vec<usize>,
    /// Per-depth `layer,abs_err,rel_err` tables of the adjoint experiments.
    pub gradients: Vec<DepthGradients>,
}

impl StudyOutcome {
    pub fn series(&self, metric: &str) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.metric == metric)
            .filter_map(|r| r.value.value().map(|v| (r.depth, v)))
            .collect()
    }

    pub fn slope(&self, metric: &str) -> Option<&MetricSlope> {
        self.slopes.iter().find(|s| s.metric == metric)
    }

    pub fn write_study_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["N", "metric", "value"])
            .map_err(odenet_core::Error::from)?;
        for r in &self.records {
            w.write_record([r.depth.to_string(), r.metric.to_string(), r.value.csv_field()])
                .map_err(odenet_core::Error::from)?;
        }
        w.flush().map_err(io_err("study.csv"))?;
        Ok(())
    }

    pub fn write_slopes_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "slope", "intercept", "r2", "flag"])
            .map_err(odenet_core::Error::from)?;
        for s in &self.slopes {
            let (slope, intercept, r2) = match &s.fit {
                Some(f) => (f.slope.to_string(), f.intercept.to_string(), f.r_squared.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([s.metric, &slope, &intercept, &r2, s.flag()])
                .map_err(odenet_core::Error::from)?;
        }
        w.flush().map_err(io_err("slopes.csv"))?;
        Ok(())
    }

    /// Log-log gnuplot script over `study.csv`, one curve per metric.
    pub fn gnuplot_script(&self) -> String {
        let metrics: Vec<&str> = self.slopes.iter().map(|s| s.metric).collect();
        format!(
            "set datafile separator ','\nset logscale xy\nset xlabel 'N'\nset ylabel 'error'\n\
             plot for [m in \"{}\"] sprintf(\"< grep ',%s,' study.csv\", m) using 1:3 with linespoints title m\n",
            metrics.join(" ")
        )
    }

    /// Writes `study.csv`, `slopes.csv`, `plot.gp` and one
    /// `gradients_N<depth>.csv` per depth.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("study.csv");
        self.write_study_csv(File::create(&path).map_err(io_err(&path))?)?;
        let path = dir.join("slopes.csv");
        self.write_slopes_csv(File::create(&path).map_err(io_err(&path))?)?;
        let path = dir.join("plot.gp");
        std::fs::write(&path, self.gnuplot_script()).map_err(io_err(&path))?;
        for g in &self.gradients {
            let path = dir.join(format!("gradients_N{}.csv", g.depth));
            std::fs::write(&path, &g.csv).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

struct DepthResult {
    metrics: Vec<(&'static str, f64, f64)>,
    gradients: Option<Vec<u8>>,
}

fn metrics_for(experiment: Experiment) -> &'static [&'static str] {
    match experiment {
        Experiment::ApproxError => &[APPROX_ERROR],
        _ => &[RECONSTRUCTION_ERROR, GRADIENT_ABS_ERROR, GRADIENT_REL_ERROR],
    }
}

fn run_depth(
    cfg: &ExperimentConfig,
    family: &dyn ResidualFamily<f64>,
    schedule: &WeightSchedule<f64>,
    x0: &Vector<f64>,
    target: &Vector<f64>,
) -> Result<DepthResult, Error> {
    if cfg.experiment == Experiment::ApproxError {
        let traj = forward_euler_chain(family, schedule, x0)?;
        let field = interpolate(family, schedule, cfg.interpolation)?;
        let sol = solve_ode_default(&field, x0)?;
        let err = approximation_error(&traj, &sol)?;
        return Ok(DepthResult {
            metrics: vec![(APPROX_ERROR, err.max, traj.extent())],
            gradients: None,
        });
    }
    let scheme = if cfg.experiment == Experiment::HeunAdjoint {
        Scheme::Heun
    } else {
        Scheme::Euler
    };
    let traj = forward_chain(scheme, family, schedule, x0)?;
    let report = match scheme {
        Scheme::Euler => reconstruct_backward_euler(family, schedule, traj.output(), Some(&traj))?,
        Scheme::Heun => reconstruct_backward_heun(family, schedule, traj.output(), Some(&traj))?,
    };
    let (_, output_grad) = quadratic_output_loss(traj.output(), target);
    let exact = backprop_exact_for(family, schedule, &traj, &output_grad)?;
    let approx = backprop_adjoint(scheme, family, schedule, traj.output(), &output_grad)?;
    let cmp = compare_gradients(&exact, &approx)?;
    let grad_scale = exact.flat_params().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut csv = Vec::new();
    cmp.write_csv(&mut csv)?;
    Ok(DepthResult {
        metrics: vec![
            (RECONSTRUCTION_ERROR, report.max_error.unwrap_or(0.0), traj.extent()),
            (GRADIENT_ABS_ERROR, cmp.max_abs, grad_scale),
            (GRADIENT_REL_ERROR, cmp.max_rel, 1.0),
        ],
        gradients: Some(csv),
    })
}

/// Runs the forward/backward pair of the configured experiment at every
/// depth and fits `log(error)` against `log(N)` per metric.
///
/// All random draws (profile, input, target) happen once, so every depth
/// samples the same underlying network. A depth whose chain diverges is
/// recorded as such and skipped; if every depth diverges the study fails.
pub fn run_scaling_study(cfg: &ExperimentConfig) -> Result<StudyOutcome> {
    cfg.expect_experiment(
        "study",
        &[
            Experiment::ApproxError,
            Experiment::EulerAdjoint,
            Experiment::HeunAdjoint,
        ],
    )?;
    if cfg.ramp {
        return Err(HarnessError::config(
            "schedule_profile = ramp applies to linear flows only",
        ));
    }
    let family = build_family(cfg)?;
    let mut rng = rng_from_seed(cfg.seed);
    let profile = if cfg.profile == ProfileKind::Index {
        Profile::index(family.param_dim())
    } else {
        Profile::random(
            cfg.profile,
            family.param_dim(),
            cfg.profile_scale,
            cfg.alternation,
            &mut rng,
        )
    };
    let x0 = gaussian_vector::<f64>(&mut rng, cfg.dim).scaled(cfg.input_scale);
    let target = gaussian_vector::<f64>(&mut rng, cfg.dim);

    let metrics = metrics_for(cfg.experiment);
    let mut records = Vec::new();
    let mut diverged = Vec::new();
    let mut gradients = Vec::new();
    let mut last_divergence = None;
    for &depth in &cfg.depths {
        let schedule = profile.schedule(depth)?;
        match run_depth(cfg, family.as_ref(), &schedule, &x0, &target) {
            Ok(result) => {
                for (metric, value, magnitude) in result.metrics {
                    let value = if value <= noise_floor(magnitude) {
                        RecordValue::Floor(value)
                    } else {
                        RecordValue::Value(value)
                    };
                    records.push(StudyRecord { depth, metric, value });
                }
                if let Some(csv) = result.gradients {
                    gradients.push(DepthGradients { depth, csv });
                }
            }
            Err(e @ (Error::Divergence { .. } | Error::NonFinite(_))) => {
                diverged.push(depth);
                last_divergence = Some(e);
                for &metric in metrics {
                    records.push(StudyRecord {
                        depth,
                        metric,
                        value: RecordValue::Diverged,
                    });
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    if diverged.len() == cfg.depths.len() {
        return Err(HarnessError::AllDiverged(
            last_divergence.map(|e| e.to_string()).unwrap_or_default(),
        ));
    }

    let slopes = metrics
        .iter()
        .map(|&metric| {
            let points: Vec<(usize, f64)> = records
                .iter()
                .filter(|r| r.metric == metric)
                .filter_map(|r| match r.value {
                    RecordValue::Value(v) => Some((r.depth, v)),
                    _ => None,
                })
                .collect();
            let fit = if points.len() >= 2 {
                fit_loglog_slope(&points).ok()
            } else {
                None
            };
            let low_confidence = fit.is_some_and(|f| f.r_squared < cfg.r2_threshold);
            MetricSlope {
                metric,
                fit,
                low_confidence,
            }
        })
        .collect();
    Ok(StudyOutcome {
        experiment: cfg.experiment,
        records,
        slopes,
        diverged,
        gradients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn euler_study_rates() {
        let out = run_scaling_study(&cfg("experiment = euler_adjoint\ndepths = 16,32,64,128,256")).unwrap();
        let rec = out.slope(RECONSTRUCTION_ERROR).unwrap().fit.unwrap();
        let grad = out.slope(GRADIENT_ABS_ERROR).unwrap().fit.unwrap();
        assert!((rec.slope + 1.0).abs() < 0.15, "{}", rec.slope);
        assert!((grad.slope + 2.0).abs() < 0.2, "{}", grad.slope);
        assert_eq!(out.gradients.len(), 5);
    }

    #[test]
    fn approximation_study_on_alternating_weights_does_not_converge() {
        let out = run_scaling_study(&cfg(
            "experiment = approx_error\nschedule_profile = alternating\nalternation = 1\ndepths = 16,64,256",
        ))
        .unwrap();
        let fit = out.slope(APPROX_ERROR).unwrap().fit.unwrap();
        assert!(fit.slope > -0.3, "{}", fit.slope);
        let smooth = run_scaling_study(&cfg("experiment = approx_error\ndepths = 16,64,256")).unwrap();
        let fit = smooth.slope(APPROX_ERROR).unwrap().fit.unwrap();
        assert!((fit.slope + 1.0).abs() < 0.15, "{}", fit.slope);
    }

    #[test]
    fn divergent_depths_are_flagged() {
        // θ_n = n on x ↦ θx multiplies by ∏(1 + n/N) ≈ e^{0.386 N}
        let base = "experiment = euler_adjoint\nfamily = linear\ndim = 1\nschedule_profile = index\n";
        let c = cfg(&format!("{base}depths = 128,256"));
        assert_eq!(run_scaling_study(&c).unwrap_err().exit_code(), 3);

        let out = run_scaling_study(&cfg(&format!("{base}depths = 4,8,128"))).unwrap();
        assert_eq!(out.diverged, vec![128]);
        let mut buf = Vec::new();
        out.write_study_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("128,gradient_max_rel_error,diverged\n"), "{text}");
        assert!(out.slope(RECONSTRUCTION_ERROR).unwrap().fit.is_some());
    }

    #[test]
    fn slopes_csv_flags() {
        let out = StudyOutcome {
            experiment: Experiment::EulerAdjoint,
            records: vec![],
            slopes: vec![
                MetricSlope {
                    metric: "a",
                    fit: Some(SlopeFit {
                        slope: -1.0,
                        intercept: 0.5,
                        r_squared: 0.5,
                        points_used: 3,
                    }),
                    low_confidence: true,
                },
                MetricSlope {
                    metric: "b",
                    fit: None,
                    low_confidence: false,
                },
            ],
            diverged: vec![],
            gradients: vec![],
        };
        let mut buf = Vec::new();
        out.write_slopes_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "metric,slope,intercept,r2,flag\na,-1,0.5,0.5,low_confidence\nb,,,,insufficient_points\n"
        );
    }

    #[test]
    fn wrong_experiment_is_a_config_error() {
        let e = run_scaling_study(&cfg("experiment = toy_train")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
