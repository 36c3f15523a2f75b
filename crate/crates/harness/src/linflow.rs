//! Gradient-flow experiments on deep linear networks: invariant monitors,
//! depth doubling and the limit map.

use std::fs::File;
use std::path::Path;

use odenet_core::linear_flow::{
    check_assumption1, compliant_problem, depth_double_compare, extract_limit_map, integrate_flow, monitor_invariants,
    product_vs_ode, profile_flow_map, Assumption1Report, FlowState, FlowTrace, InvariantReport, LimitMap,
    RegressionProblem,
};
use odenet_core::numerics::random::{gaussian_matrix, rng_from_seed};
use odenet_core::numerics::Matrix;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{io_err, HarnessError, Result};
use crate::profiles::{Profile, ProfileKind};

/// Runge-Kutta steps used for the continuum flow map of the initial profile.
const FLOW_MAP_STEPS: usize = 4096;
/// Grid used to estimate the Lipschitz constant of the initial profile.
const LIPSCHITZ_GRID: usize = 1000;
/// The smoothness statistic may grow to this multiple of the profile's
/// Lipschitz constant at every depth.
pub const SMOOTHNESS_GROWTH: f64 = 10.0;

/// Initial weight profile `s ↦ g(s)` shared by every depth.
#[derive(Debug, Clone)]
pub enum InitProfile {
    Random {
        profile: Profile,
        dim: usize,
    },
    /// `g(s) = slope·s·I`.
    Ramp {
        slope: f64,
        dim: usize,
    },
}

impl InitProfile {
    pub fn from_config(cfg: &ExperimentConfig, rng: &mut impl rand::Rng) -> Result<Self> {
        let d = cfg.dim;
        if cfg.ramp {
            return Ok(Self::Ramp {
                slope: cfg.profile_scale,
                dim: d,
            });
        }
        match cfg.profile {
            ProfileKind::Constant | ProfileKind::Lipschitz => Ok(Self::Random {
                profile: Profile::random(cfg.profile, d * d, cfg.profile_scale, 0.0, rng),
                dim: d,
            }),
            other => Err(HarnessError::config(format!(
                "linear flows need a smooth initial profile, got {}",
                other.as_str()
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Random { dim, .. } | Self::Ramp { dim, .. } => *dim,
        }
    }

    pub fn at(&self, s: f64) -> Matrix<f64> {
        match self {
            Self::Random { profile, dim } => profile.matrix(s, *dim),
            Self::Ramp { slope, dim } => Matrix::identity(*dim).scale(slope * s),
        }
    }

    /// `max ‖g(s') − g(s)‖/|s' − s|` in spectral norm over a uniform grid.
    pub fn lipschitz_estimate(&self) -> Result<f64> {
        let h = 1.0 / LIPSCHITZ_GRID as f64;
        let mut best = 0.0f64;
        let mut prev = self.at(0.0);
        for k in 1..=LIPSCHITZ_GRID {
            let cur = self.at(k as f64 * h);
            best = best.max(cur.sub(&prev).spectral_norm()? / h);
            prev = cur;
        }
        Ok(best)
    }
}

#[derive(Debug, Clone)]
pub struct DepthFlow {
    pub trace: FlowTrace<f64>,
    pub assumption: Assumption1Report<f64>,
    pub invariants: InvariantReport<f64>,
    /// `max_k ‖Π x₀ − x(1)‖` over unit probes at the final time.
    pub product_vs_ode: f64,
}

#[derive(Debug, Clone)]
pub struct LinflowOutcome {
    pub problem: RegressionProblem<f64>,
    /// Sorted by depth; the last one is the limit-map reference.
    pub flows: Vec<DepthFlow>,
    /// `(N, D_N)` for every `N` whose double also ran.
    pub doubling: Vec<(usize, f64)>,
    pub limit_map: LimitMap<f64>,
    pub lipschitz: f64,
    /// `SMOOTHNESS_GROWTH` times the profile's Lipschitz constant.
    pub smoothness_bound: f64,
}

impl LinflowOutcome {
    pub fn depths(&self) -> Vec<usize> {
        self.flows.iter().map(|f| f.trace.depth()).collect()
    }

    pub fn flow(&self, depth: usize) -> Option<&DepthFlow> {
        self.flows.iter().find(|f| f.trace.depth() == depth)
    }

    /// `D_{2N}/D_N` for consecutive doublings.
    pub fn doubling_ratios(&self) -> Vec<(usize, f64)> {
        self.doubling
            .windows(2)
            .filter(|w| w[1].0 == 2 * w[0].0)
            .map(|w| (w[0].0, w[1].1 / w[0].1))
            .collect()
    }

    pub fn monitors_pass(&self) -> bool {
        self.flows
            .iter()
            .all(|f| f.invariants.all_ok() && f.invariants.max_smoothness <= self.smoothness_bound)
    }

    /// Writes `trace.csv` (reference depth), `trace_N<depth>.csv`,
    /// `limitmap.csv`, `doubling.csv`, `invariants.csv` and, when asked,
    /// `schedules/N<depth>_t<index>.csv` for every snapshot.
    pub fn write_to(&self, dir: &Path, write_schedules: bool) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let create = |name: String| {
            let path = dir.join(name);
            File::create(&path).map_err(io_err(&path))
        };
        let reference = self.flows.last().expect("at least one depth");
        reference.trace.write_csv(create("trace.csv".into())?)?;
        for f in &self.flows {
            f.trace.write_csv(create(format!("trace_N{}.csv", f.trace.depth()))?)?;
        }
        self.limit_map.write_csv(create("limitmap.csv".into())?)?;

        let mut w = csv::Writer::from_writer(create("doubling.csv".into())?);
        w.write_record(["N", "distance", "ratio"])
            .map_err(odenet_core::Error::from)?;
        let ratios = self.doubling_ratios();
        for &(n, d) in &self.doubling {
            let ratio = ratios
                .iter()
                .find(|r| r.0 == n)
                .map(|r| r.1.to_string())
                .unwrap_or_default();
            w.write_record([n.to_string(), d.to_string(), ratio])
                .map_err(odenet_core::Error::from)?;
        }
        w.flush().map_err(io_err("doubling.csv"))?;

        let mut w = csv::Writer::from_writer(create("invariants.csv".into())?);
        w.write_record([
            "N",
            "max_theta_norm",
            "max_smoothness",
            "smoothness_bound",
            "max_decay_ratio",
            "product_vs_ode",
            "ok",
        ])
        .map_err(odenet_core::Error::from)?;
        for f in &self.flows {
            let r = &f.invariants;
            let ok = r.all_ok() && r.max_smoothness <= self.smoothness_bound;
            w.write_record([
                f.trace.depth().to_string(),
                r.max_theta_norm.to_string(),
                r.max_smoothness.to_string(),
                self.smoothness_bound.to_string(),
                r.max_decay_ratio.to_string(),
                f.product_vs_ode.to_string(),
                ok.to_string(),
            ])
            .map_err(odenet_core::Error::from)?;
        }
        w.flush().map_err(io_err("invariants.csv"))?;

        if write_schedules {
            let sdir = dir.join("schedules");
            std::fs::create_dir_all(&sdir).map_err(io_err(&sdir))?;
            for f in &self.flows {
                for (i, s) in f.trace.samples.iter().enumerate() {
                    let path = sdir.join(format!("N{}_t{i}.csv", f.trace.depth()));
                    s.state
                        .schedule
                        .write_csv(File::create(&path).map_err(io_err(&path))?)?;
                }
            }
        }
        Ok(())
    }
}

fn snapshot_times(t_end: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t_end * k as f64 / (count - 1) as f64).collect()
}

/// Builds one problem for every depth, integrates each flow and runs the
/// monitors, depth-doubling comparisons and the limit-map extraction.
///
/// `Σ = I`; the target is the continuum flow map of the initial profile
/// plus a random perturbation sized by `loss_fraction`. Any depth whose
/// initialisation fails the small-loss/small-weight check aborts the run.
pub fn run_linear_flow_experiment(cfg: &ExperimentConfig) -> Result<LinflowOutcome> {
    cfg.expect_experiment("linflow", &[Experiment::LinearFlow, Experiment::LimitMap])?;
    let max_depth = *cfg.depths.last().expect("depths nonempty");
    let reference = cfg.reference_depth.unwrap_or(2 * max_depth);
    if reference <= max_depth {
        return Err(HarnessError::config(format!(
            "reference_depth {reference} must exceed every study depth"
        )));
    }
    let mut depths = cfg.depths.clone();
    depths.push(reference);

    let mut rng = rng_from_seed(cfg.seed);
    let init = InitProfile::from_config(cfg, &mut rng)?;
    let d = init.dim();
    let base = profile_flow_map(d, |s| init.at(s), FLOW_MAP_STEPS)?;
    let direction: Matrix<f64> = gaussian_matrix(&mut rng, d, d);
    let problem = compliant_problem(Matrix::identity(d), &base, &direction, cfg.loss_fraction)?;
    let dt = cfg.dt.unwrap_or_else(|| problem.default_dt());
    let times = snapshot_times(cfg.t_end, cfg.snapshots);
    let lipschitz = init.lipschitz_estimate()?;

    let mut flows = Vec::with_capacity(depths.len());
    for &depth in &depths {
        let state0 = FlowState::from_profile(depth, d, |s| init.at(s))?;
        let assumption = check_assumption1(&state0, &problem)?;
        if !assumption.passes {
            return Err(HarnessError::Assumption1 {
                depth,
                detail: format!(
                    "loss margin {:e} (sqrt loss {:e} vs threshold {:e}), norm margin {:e} (max spectral norm {:e})",
                    assumption.loss_margin,
                    assumption.loss.sqrt(),
                    assumption.loss_root_threshold,
                    assumption.norm_margin,
                    assumption.max_norm
                ),
            });
        }
        let trace = integrate_flow(&state0, &problem, cfg.t_end, dt, &times)?;
        let invariants = monitor_invariants(&trace, cfg.decay_tolerance);
        let product_vs_ode = product_vs_ode(trace.final_state(), cfg.probes, cfg.seed)?;
        flows.push(DepthFlow {
            trace,
            assumption,
            invariants,
            product_vs_ode,
        });
    }

    let mut doubling = Vec::new();
    for a in &flows {
        if let Some(b) = flows.iter().find(|b| b.trace.depth() == 2 * a.trace.depth()) {
            doubling.push((a.trace.depth(), depth_double_compare(&a.trace, &b.trace)?));
        }
    }
    let traces: Vec<FlowTrace<f64>> = flows.iter().map(|f| f.trace.clone()).collect();
    let limit_map = extract_limit_map(&traces)?;
    Ok(LinflowOutcome {
        problem,
        flows,
        doubling,
        limit_map,
        lipschitz,
        smoothness_bound: SMOOTHNESS_GROWTH * lipschitz,
    })
}
