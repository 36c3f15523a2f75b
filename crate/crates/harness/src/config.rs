//! Experiment configuration.
//!
//! Files hold one `key = value` pair per line. Blank lines and lines starting
//! with `#` are skipped. Every key is optional; unknown or repeated keys are
//! rejected. Lists are comma separated.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `experiment` | `euler_adjoint` | `approx_error`, `euler_adjoint`, `heun_adjoint`, `linear_flow`, `limit_map`, `toy_train`, `tightness_suite` |
//! | `depths` | `16,32,64,128,256,512,1024` | strictly increasing depths |
//! | `family` | `mlp` | `mlp`, `linear`, `offset`, `square`, `zero` |
//! | `dim` | `4` | state dimension `d` |
//! | `hidden` | `8` | MLP hidden width |
//! | `schedule_profile` | `lipschitz_profile` | `constant`, `lipschitz_profile`, `alternating`, `index`; linear flows also take `ramp` |
//! | `profile_scale` | `0.25` | sup of the smooth profile entries |
//! | `alternation` | `0.2` | amplitude of the `(−1)^n` part of `alternating` |
//! | `input_scale` | `1.0` | standard deviation of the random input |
//! | `interpolation` | `weight_interp` | field used by `approx_error` |
//! | `seed` | `0` | RNG seed |
//! | `output_dir` | `out` | directory receiving the CSV files |
//! | `r2_threshold` | `0.9` | fits below it are flagged `low_confidence` |
//! | `t_end` | `20` | linear flow horizon |
//! | `dt` | `min(1e-2, 0.1/M)` | linear flow time step |
//! | `snapshots` | `21` | evenly spaced flow sample times, including 0 and `t_end` |
//! | `reference_depth` | `2·max(depths)` | depth of the limit-map reference |
//! | `loss_fraction` | `0.5` | initial loss as a fraction of its admissible maximum |
//! | `decay_tolerance` | `1e-3` | relative slack of the loss-decay monitor |
//! | `probes` | `20` | unit probes for the product-versus-ODE check |
//! | `write_schedules` | `true` | dump every flow snapshot schedule |
//! | `gradient` | `exact` | `exact`, `euler_adjoint`, `heun_adjoint` |
//! | `target` | `square` | `square` (x²/2) or `neg_square` (−x²/2) |
//! | `epochs` | `600` | gradient-descent iterations |
//! | `learning_rate` | `0.5` | step of `θ ← θ − lr·N·∇θ` |
//! | `points` | `64` | training inputs |
//! | `input_range` | `0,1` | interval holding the training inputs |
//! | `init_scale` | `1.0` | scale of the tied initial weights |

use std::path::{Path, PathBuf};

use odenet_core::dynamics::FieldKind;

use crate::error::{HarnessError, Result};
use crate::profiles::ProfileKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    ApproxError,
    EulerAdjoint,
    HeunAdjoint,
    LinearFlow,
    LimitMap,
    ToyTrain,
    TightnessSuite,
}

impl Experiment {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "approx_error" => Self::ApproxError,
            "euler_adjoint" => Self::EulerAdjoint,
            "heun_adjoint" => Self::HeunAdjoint,
            "linear_flow" => Self::LinearFlow,
            "limit_map" => Self::LimitMap,
            "toy_train" => Self::ToyTrain,
            "tightness_suite" => Self::TightnessSuite,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ApproxError => "approx_error",
            Self::EulerAdjoint => "euler_adjoint",
            Self::HeunAdjoint => "heun_adjoint",
            Self::LinearFlow => "linear_flow",
            Self::LimitMap => "limit_map",
            Self::ToyTrain => "toy_train",
            Self::TightnessSuite => "tightness_suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Mlp,
    Linear,
    Offset,
    Square,
    Zero,
}

impl FamilyKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "mlp" => Self::Mlp,
            "linear" => Self::Linear,
            "offset" => Self::Offset,
            "square" => Self::Square,
            "zero" => Self::Zero,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Exact,
    EulerAdjoint,
    HeunAdjoint,
}

impl GradientMode {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "exact" => Self::Exact,
            "euler_adjoint" => Self::EulerAdjoint,
            "heun_adjoint" => Self::HeunAdjoint,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::EulerAdjoint => "euler_adjoint",
            Self::HeunAdjoint => "heun_adjoint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainTarget {
    Square,
    NegSquare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub depths: Vec<usize>,
    pub family: FamilyKind,
    pub dim: usize,
    pub hidden: usize,
    pub profile: ProfileKind,
    /// Set when `schedule_profile = ramp`, which only linear flows accept.
    pub ramp: bool,
    pub profile_scale: f64,
    pub alternation: f64,
    pub input_scale: f64,
    pub interpolation: FieldKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub r2_threshold: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub snapshots: usize,
    pub reference_depth: Option<usize>,
    pub loss_fraction: f64,
    pub decay_tolerance: f64,
    pub probes: usize,
    pub write_schedules: bool,
    pub gradient: GradientMode,
    pub target: TrainTarget,
    pub epochs: usize,
    pub learning_rate: f64,
    pub points: usize,
    pub input_range: (f64, f64),
    pub init_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::EulerAdjoint,
            depths: vec![16, 32, 64, 128, 256, 512, 1024],
            family: FamilyKind::Mlp,
            dim: 4,
            hidden: 8,
            profile: ProfileKind::Lipschitz,
            ramp: false,
            profile_scale: 0.25,
            alternation: 0.2,
            input_scale: 1.0,
            interpolation: FieldKind::WeightInterp,
            seed: 0,
            output_dir: PathBuf::from("out"),
            r2_threshold: 0.9,
            t_end: 20.0,
            dt: None,
            snapshots: 21,
            reference_depth: None,
            loss_fraction: 0.5,
            decay_tolerance: 1e-3,
            probes: 20,
            write_schedules: true,
            gradient: GradientMode::Exact,
            target: TrainTarget::Square,
            epochs: 600,
            learning_rate: 0.5,
            points: 64,
            input_range: (0.0, 1.0),
            init_scale: 1.0,
        }
    }
}

fn bad(key: &str, value: &str) -> HarnessError {
    HarnessError::config(format!("invalid value for `{key}`: {value:?}"))
}

fn num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| bad(key, value))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value))
    }
}

fn count(key: &str, value: &str) -> Result<usize> {
    let v: usize = num(key, value)?;
    if v == 0 {
        return Err(bad(key, value));
    }
    Ok(v)
}

/// Parses `16,32,64` into a nonempty, strictly increasing list of positive depths.
pub fn parse_depths(value: &str) -> Result<Vec<usize>> {
    let depths = value
        .split(',')
        .map(|s| count("depths", s.trim()))
        .collect::<Result<Vec<_>>>()?;
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::config(format!(
            "depths must be strictly increasing, got {value:?}"
        )));
    }
    Ok(depths)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(HarnessError::config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            cfg.set(key, value)
                .map_err(|e| HarnessError::config(format!("line {}: {}", lineno + 1, strip(e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = Experiment::parse(value).ok_or_else(|| bad(key, value))?,
            "depths" => self.depths = parse_depths(value)?,
            "family" => self.family = FamilyKind::parse(value).ok_or_else(|| bad(key, value))?,
            "dim" => self.dim = count(key, value)?,
            "hidden" => self.hidden = count(key, value)?,
            "schedule_profile" => {
                self.ramp = value == "ramp";
                if !self.ramp {
                    self.profile = ProfileKind::parse(value).ok_or_else(|| bad(key, value))?;
                }
            }
            "profile_scale" => self.profile_scale = positive(key, value)?,
            "alternation" => self.alternation = positive(key, value)?,
            "input_scale" => self.input_scale = positive(key, value)?,
            "interpolation" => {
                self.interpolation = match value {
                    "residual_interp" => FieldKind::ResidualInterp,
                    "weight_interp" => FieldKind::WeightInterp,
                    _ => return Err(bad(key, value)),
                }
            }
            "seed" => self.seed = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "r2_threshold" => {
                let v: f64 = num(key, value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad(key, value));
                }
                self.r2_threshold = v;
            }
            "t_end" => self.t_end = positive(key, value)?,
            "dt" => self.dt = Some(positive(key, value)?),
            "snapshots" => {
                self.snapshots = num(key, value)?;
                if self.snapshots < 2 {
                    return Err(bad(key, value));
                }
            }
            "reference_depth" => self.reference_depth = Some(count(key, value)?),
            "loss_fraction" => {
                let v: f64 = num(key, value)?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(bad(key, value));
                }
                self.loss_fraction = v;
            }
            "decay_tolerance" => self.decay_tolerance = positive(key, value)?,
            "probes" => self.probes = count(key, value)?,
            "write_schedules" => self.write_schedules = num(key, value)?,
            "gradient" => self.gradient = GradientMode::parse(value).ok_or_else(|| bad(key, value))?,
            "target" => {
                self.target = match value {
                    "square" => TrainTarget::Square,
                    "neg_square" => TrainTarget::NegSquare,
                    _ => return Err(bad(key, value)),
                }
            }
            "epochs" => self.epochs = count(key, value)?,
            "learning_rate" => self.learning_rate = positive(key, value)?,
            "points" => {
                self.points = num(key, value)?;
                if self.points < 2 {
                    return Err(bad(key, value));
                }
            }
            "input_range" => {
                let (lo, hi) = value.split_once(',').ok_or_else(|| bad(key, value))?;
                let (lo, hi): (f64, f64) = (num(key, lo.trim())?, num(key, hi.trim())?);
                if !(lo < hi) {
                    return Err(bad(key, value));
                }
                self.input_range = (lo, hi);
            }
            "init_scale" => self.init_scale = positive(key, value)?,
            _ => return Err(HarnessError::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies command-line overrides on top of the file values.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<&Path>, depths: Option<&str>) -> Result<()> {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.output_dir = out.to_path_buf();
        }
        if let Some(d) = depths {
            self.depths = parse_depths(d)?;
        }
        Ok(())
    }

    /// Rejects configurations whose experiment does not belong to `command`.
    pub fn expect_experiment(&self, command: &str, allowed: &[Experiment]) -> Result<()> {
        if allowed.contains(&self.experiment) {
            Ok(())
        } else {
            let names: Vec<&str> = allowed.iter().map(|e| e.as_str()).collect();
            Err(HarnessError::config(format!(
                "`{command}` runs experiments {}, config asks for {}",
                names.join("/"),
                self.experiment.as_str()
            )))
        }
    }
}

fn strip(e: HarnessError) -> String {
    match e {
        HarnessError::Config(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_file() {
        let cfg = ExperimentConfig::parse(
            "# study\nexperiment = heun_adjoint\ndepths = 8, 16,32\n\nfamily = linear\nseed = 7\n\
             schedule_profile = alternating\ninput_range = 0, 2\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::HeunAdjoint);
        assert_eq!(cfg.depths, vec![8, 16, 32]);
        assert_eq!(cfg.family, FamilyKind::Linear);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.profile, ProfileKind::Alternating);
        assert_eq!(cfg.input_range, (0.0, 2.0));
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        assert!(matches!(
            ExperimentConfig::parse("colour = red"),
            Err(HarnessError::Config(_))
        ));
        assert!(ExperimentConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(ExperimentConfig::parse("just words").is_err());
    }

    #[test]
    fn depths_must_increase() {
        assert!(parse_depths("16,16").is_err());
        assert!(parse_depths("32,16").is_err());
        assert!(parse_depths("0,4").is_err());
        assert!(parse_depths("").is_err());
        assert_eq!(parse_depths("1").unwrap(), vec![1]);
    }

    #[test]
    fn bad_values() {
        for text in [
            "experiment = nope",
            "dim = 0",
            "dt = -1",
            "loss_fraction = 1",
            "input_range = 1,0",
            "r2_threshold = 2",
            "write_schedules = maybe",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::parse("seed = 3\ndepths = 4,8").unwrap();
        cfg.apply_overrides(Some(9), Some(Path::new("/tmp/x")), Some("2,4,8"))
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.depths, vec![2, 4, 8]);
        assert_eq!(cfg.apply_overrides(None, None, Some("8,4")).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn ramp_is_a_profile_value() {
        let cfg = ExperimentConfig::parse("schedule_profile = ramp").unwrap();
        assert!(cfg.ramp);
    }
}
