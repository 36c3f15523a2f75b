//! Full-batch training of a one-dimensional residual MLP on `x ↦ ±x²/2`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use odenet_core::adjoint::{adjoint_sweep_euler, adjoint_sweep_heun, backprop_exact, GradientSink};
use odenet_core::dynamics::{forward_chain, forward_euler_chain, forward_output, Scheme, Trajectory};
use odenet_core::numerics::random::{gaussian_vector, rng_from_seed};
use odenet_core::numerics::Vector;
use odenet_core::residual::{make_mlp_family, MlpFamily, ResidualFamily, WeightSchedule};
use odenet_core::Error;

use crate::config::{Experiment, ExperimentConfig, GradientMode, TrainTarget};
use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Dataset {
    /// `points` evenly spaced inputs on `[lo, hi]`.
    pub fn new(target: TrainTarget, points: usize, (lo, hi): (f64, f64)) -> Self {
        let inputs: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let sign = match target {
            TrainTarget::Square => 1.0,
            TrainTarget::NegSquare => -1.0,
        };
        let targets = inputs.iter().map(|x| sign * x * x / 2.0).collect();
        Self { inputs, targets }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

impl GradientMode {
    pub fn scheme(self) -> Scheme {
        match self {
            Self::Exact | Self::EulerAdjoint => Scheme::Euler,
            Self::HeunAdjoint => Scheme::Heun,
        }
    }
}

/// Adds every layer gradient into a flat buffer.
struct Accumulate<'a> {
    grads: &'a mut [f64],
    param_dim: usize,
}

impl GradientSink<f64> for Accumulate<'_> {
    fn param_grad(&mut self, layer: usize, grad: &Vector<f64>) {
        let slot = &mut self.grads[layer * self.param_dim..(layer + 1) * self.param_dim];
        for (s, g) in slot.iter_mut().zip(grad.iter()) {
            *s += g;
        }
    }
}

/// Mean squared error `(1/P) Σ (x_N − y)²` and its gradient with respect to
/// the flat schedule.
///
/// The adjoint modes keep only the current state per input: the forward pass
/// returns `x_N` alone and the reverse sweep streams layer gradients into the
/// accumulator.
pub fn batch_gradient<F>(
    mode: GradientMode,
    family: &F,
    schedule: &WeightSchedule<f64>,
    data: &Dataset,
) -> Result<(f64, Vec<f64>), Error>
where
    F: ResidualFamily<f64> + ?Sized,
{
    let p = data.len() as f64;
    let mut grads = vec![0.0; schedule.flat().len()];
    let mut loss = 0.0;
    for (&x, &y) in data.inputs.iter().zip(&data.targets) {
        let x0 = [x];
        let out = match mode {
            GradientMode::Exact => {
                let traj = forward_euler_chain(family, schedule, &x0)?;
                let r = traj.output()[0] - y;
                let g = backprop_exact(family, schedule, &traj, &[2.0 * r / p])?;
                for (slot, v) in grads.iter_mut().zip(g.flat_params()) {
                    *slot += v;
                }
                r
            }
            GradientMode::EulerAdjoint | GradientMode::HeunAdjoint => {
                let xn = forward_output(mode.scheme(), family, schedule, &x0)?;
                let r = xn[0] - y;
                let mut sink = Accumulate {
                    grads: &mut grads,
                    param_dim: schedule.param_dim(),
                };
                let og = [2.0 * r / p];
                if mode == GradientMode::EulerAdjoint {
                    adjoint_sweep_euler(family, schedule, &xn, &og, &mut sink)?;
                } else {
                    adjoint_sweep_heun(family, schedule, &xn, &og, &mut sink)?;
                }
                r
            }
        };
        loss += out * out / p;
    }
    Ok((loss, grads))
}

pub fn mean_squared_loss<F>(
    scheme: Scheme,
    family: &F,
    schedule: &WeightSchedule<f64>,
    data: &Dataset,
) -> Result<f64, Error>
where
    F: ResidualFamily<f64> + ?Sized,
{
    let mut loss = 0.0;
    for (&x, &y) in data.inputs.iter().zip(&data.targets) {
        let r = forward_output(scheme, family, schedule, &[x])?[0] - y;
        loss += r * r;
    }
    Ok(loss / data.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub depth: usize,
    pub mode: GradientMode,
    /// Loss before each update, then the final loss.
    pub losses: Vec<f64>,
    pub schedule: WeightSchedule<f64>,
    /// One trajectory per training input, under the trained weights.
    pub trajectories: Vec<Trajectory<f64>>,
}

impl TrainingRun {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("losses recorded")
    }

    /// Writes `node_index,s,x_0,..,x_{P−1}` where column `x_i` follows input `i`.
    pub fn write_trajectories<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["node_index".to_string(), "s".to_string()];
        header.extend((0..self.trajectories.len()).map(|i| format!("x_{i}")));
        w.write_record(&header).map_err(Error::from)?;
        for n in 0..=self.depth {
            let mut row = vec![n.to_string(), (n as f64 / self.depth as f64).to_string()];
            row.extend(self.trajectories.iter().map(|t| t.nodes[n][0].to_string()));
            w.write_record(&row).map_err(Error::from)?;
        }
        w.flush().map_err(io_err("trajectories.csv"))?;
        Ok(())
    }

    pub fn write_losses<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "loss"]).map_err(Error::from)?;
        for (i, l) in self.losses.iter().enumerate() {
            w.write_record([i.to_string(), l.to_string()]).map_err(Error::from)?;
        }
        w.flush().map_err(io_err("loss.csv"))?;
        Ok(())
    }
}

pub fn toy_family(cfg: &ExperimentConfig) -> Result<MlpFamily> {
    Ok(make_mlp_family(1, cfg.hidden)?)
}

/// Every layer starts from the same random parameter vector.
pub fn tied_init(family: &MlpFamily, depth: usize, scale: f64, seed: u64) -> Result<WeightSchedule<f64>> {
    let theta = gaussian_vector::<f64>(&mut rng_from_seed(seed), family.param_dim()).scaled(scale);
    Ok(WeightSchedule::constant(depth, &theta)?)
}

/// Gradient descent `θ ← θ − lr·N·∇θ` at one depth.
pub fn train_at_depth(cfg: &ExperimentConfig, depth: usize) -> Result<TrainingRun> {
    let family = toy_family(cfg)?;
    let data = Dataset::new(cfg.target, cfg.points, cfg.input_range);
    let mut schedule = tied_init(&family, depth, cfg.init_scale, cfg.seed)?;
    let step = cfg.learning_rate * depth as f64;
    let diverged = |epoch: usize| move |source: Error| HarnessError::TrainingDiverged { depth, epoch, source };
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let mut flat = schedule.flat().to_vec();
    for epoch in 0..cfg.epochs {
        let (loss, grads) = batch_gradient(cfg.gradient, &family, &schedule, &data).map_err(diverged(epoch))?;
        losses.push(loss);
        for (w, g) in flat.iter_mut().zip(&grads) {
            *w -= step * g;
        }
        schedule = schedule.with_flat(&flat)?;
        if !schedule.is_finite() {
            return Err(diverged(epoch)(Error::NonFinite("parameters after update".into())));
        }
    }
    let scheme = cfg.gradient.scheme();
    losses.push(mean_squared_loss(scheme, &family, &schedule, &data).map_err(diverged(cfg.epochs))?);
    let trajectories = data
        .inputs
        .iter()
        .map(|&x| forward_chain(scheme, &family, &schedule, &[x]))
        .collect::<Result<Vec<_>, Error>>()
        .map_err(diverged(cfg.epochs))?;
    Ok(TrainingRun {
        depth,
        mode: cfg.gradient,
        losses,
        schedule,
        trajectories,
    })
}

pub fn run_toy_training(cfg: &ExperimentConfig) -> Result<Vec<TrainingRun>> {
    cfg.expect_experiment("train", &[Experiment::ToyTrain])?;
    cfg.depths.iter().map(|&d| train_at_depth(cfg, d)).collect()
}

/// Writes `loss_N<depth>.csv` and `trajectories_N<depth>.csv` per run,
/// `trajectories.csv` for the deepest run and `summary.csv`
/// (`N,gradient,final_loss`).
pub fn write_training(runs: &[TrainingRun], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let create = |name: String| {
        let path = dir.join(name);
        File::create(&path).map_err(io_err(&path))
    };
    for r in runs {
        r.write_losses(create(format!("loss_N{}.csv", r.depth))?)?;
        r.write_trajectories(create(format!("trajectories_N{}.csv", r.depth))?)?;
    }
    if let Some(deepest) = runs.last() {
        deepest.write_trajectories(create("trajectories.csv".into())?)?;
    }
    let mut w = csv::Writer::from_writer(create("summary.csv".into())?);
    w.write_record(["N", "gradient", "final_loss"]).map_err(Error::from)?;
    for r in runs {
        w.write_record([
            r.depth.to_string(),
            r.mode.as_str().to_string(),
            r.final_loss().to_string(),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(io_err("summary.csv"))?;
    Ok(())
}
