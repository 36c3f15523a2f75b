//! Depth profiles: functions `s ↦ θ(s)` sampled at `s = n/N` to build weight
//! schedules that share one shape across depths.

use odenet_core::numerics::random::{gaussian, gaussian_vector};
use odenet_core::numerics::{Matrix, Vector};
use odenet_core::residual::WeightSchedule;
use odenet_core::Result;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Constant,
    Lipschitz,
    Alternating,
    Index,
}

impl ProfileKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "constant" => Self::Constant,
            "lipschitz_profile" => Self::Lipschitz,
            "alternating" => Self::Alternating,
            "index" => Self::Index,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Lipschitz => "lipschitz_profile",
            Self::Alternating => "alternating",
            Self::Index => "index",
        }
    }
}

const CUBIC_TERMS: usize = 4;

/// A vector-valued depth profile. Each entry is a cubic polynomial in `s`,
/// plus an optional `(−1)^n` perturbation that no smooth profile has.
#[derive(Debug, Clone)]
pub struct Profile {
    kind: ProfileKind,
    dim: usize,
    /// `coeffs[i * 4 + k]` multiplies `s^k` in entry `i`.
    coeffs: Vec<f64>,
    alternation: Vec<f64>,
}

fn cubic(c: &[f64], s: f64) -> f64 {
    c[0] + s * (c[1] + s * (c[2] + s * c[3]))
}

impl Profile {
    /// Draws a profile with `sup_s max_i |g_i(s)| = scale`.
    ///
    /// `Constant` keeps only the `s⁰` terms. `Alternating` adds `(−1)^n δ`
    /// with `max_i |δ_i| = delta` on top of a smooth profile.
    pub fn random(kind: ProfileKind, dim: usize, scale: f64, delta: f64, rng: &mut impl Rng) -> Self {
        let mut coeffs: Vec<f64> = (0..dim * CUBIC_TERMS).map(|_| gaussian(rng)).collect();
        if kind == ProfileKind::Constant {
            for (j, c) in coeffs.iter_mut().enumerate() {
                if j % CUBIC_TERMS != 0 {
                    *c = 0.0;
                }
            }
        }
        let mut profile = Self {
            kind,
            dim,
            coeffs,
            alternation: vec![0.0; dim],
        };
        let sup = profile.smooth_sup();
        if sup > 0.0 {
            let k = scale / sup;
            profile.coeffs.iter_mut().for_each(|c| *c *= k);
        }
        if kind == ProfileKind::Alternating {
            let d: Vector<f64> = gaussian_vector(rng, dim);
            let m = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            profile.alternation = d.iter().map(|v| v * delta / m).collect();
        }
        profile
    }

    /// `θ_n = n` in every entry.
    pub fn index(dim: usize) -> Self {
        Self {
            kind: ProfileKind::Index,
            dim,
            coeffs: vec![0.0; dim * CUBIC_TERMS],
            alternation: vec![0.0; dim],
        }
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn smooth_sup(&self) -> f64 {
        (0..=1000)
            .map(|k| {
                self.smooth(k as f64 / 1000.0)
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }

    /// The smooth part `g(s)`.
    pub fn smooth(&self, s: f64) -> Vector<f64> {
        Vector::from_fn(self.dim, |i| {
            cubic(&self.coeffs[i * CUBIC_TERMS..(i + 1) * CUBIC_TERMS], s)
        })
    }

    /// Parameter of layer `n` in a network of depth `depth`.
    pub fn at(&self, n: usize, depth: usize) -> Vector<f64> {
        if self.kind == ProfileKind::Index {
            return Vector::filled(self.dim, n as f64);
        }
        let mut v = self.smooth(n as f64 / depth as f64);
        if self.kind == ProfileKind::Alternating {
            let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
            for (x, d) in v.iter_mut().zip(&self.alternation) {
                *x += sign * d;
            }
        }
        v
    }

    /// `θ_n = at(n, N)` for `n < N`, with the terminal parameter `at(N, N)`.
    pub fn schedule(&self, depth: usize) -> Result<WeightSchedule<f64>> {
        WeightSchedule::from_fn(depth, self.dim, |n| self.at(n, depth))?.with_terminal(self.at(depth, depth))
    }

    /// The smooth part read as a row-major `d × d` matrix.
    pub fn matrix(&self, s: f64, d: usize) -> Matrix<f64> {
        Matrix::from_row_major(d, d, self.smooth(s).into_vec()).expect("profile dimension is d²")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use odenet_core::numerics::random::rng_from_seed;
    use odenet_core::residual::weight_smoothness;

    #[test]
    fn lipschitz_profile_is_bounded_and_smooth() {
        let p = Profile::random(ProfileKind::Lipschitz, 12, 0.25, 0.0, &mut rng_from_seed(1));
        for depth in [16, 64, 256] {
            let s = p.schedule(depth).unwrap();
            assert!(s.flat().iter().all(|v| v.abs() <= 0.25 + 1e-9));
            let delta = weight_smoothness(&s).unwrap();
            assert!(delta * (depth * depth) as f64 <= 10.0, "{delta}");
        }
    }

    #[test]
    fn constant_profile_repeats_one_layer() {
        let p = Profile::random(ProfileKind::Constant, 3, 0.25, 0.0, &mut rng_from_seed(2));
        let s = p.schedule(5).unwrap();
        assert!(s.layers().all(|l| l == s.layer(0)));
        assert_eq!(s.terminal().unwrap(), s.layer(0));
    }

    #[test]
    fn alternating_profile_does_not_smooth_out() {
        let p = Profile::random(ProfileKind::Alternating, 4, 0.25, 0.2, &mut rng_from_seed(3));
        for depth in [16, 256] {
            let delta = weight_smoothness(&p.schedule(depth).unwrap()).unwrap();
            assert!(delta > 0.1, "{delta}");
        }
    }

    #[test]
    fn index_profile() {
        let s = Profile::index(1).schedule(4).unwrap();
        assert_eq!(s.flat(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.terminal().unwrap(), &[4.0]);
    }

    #[test]
    fn same_seed_same_profile() {
        let a = Profile::random(ProfileKind::Lipschitz, 5, 0.25, 0.0, &mut rng_from_seed(7));
        let b = Profile::random(ProfileKind::Lipschitz, 5, 0.25, 0.0, &mut rng_from_seed(7));
        assert_eq!(a.at(3, 10), b.at(3, 10));
    }
}
