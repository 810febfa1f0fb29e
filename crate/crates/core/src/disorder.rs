//! Random environments on `{0,1}^d`: the REM-like trap model with Pareto
//! waiting times and the random hopping times dynamics of the REM, each with
//! the speed-up `c_d` of its ergodic time scale.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kprocess::GammaMeasure;
use crate::rng::{Domain, RngSpec};
use crate::trajectory::{State, Trajectory, TrajectoryBuilder};
use crate::trapmodel::{build_rank_map, Graph, RankMap, TrapModelSpec, MAX_HYPERCUBE_DIM};

/// `sqrt(2 log 2)`, the critical inverse temperature of the REM.
pub fn beta_critical() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

/// `α = sqrt(2 log 2) / β`.
pub fn rem_alpha(beta: f64) -> f64 {
    beta_critical() / beta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisorderKind {
    /// iid waiting times with `P(τ > t) = t^{-α}` for `t >= 1`.
    RemLikePareto { alpha: f64 },
    /// `τ_v = exp(β sqrt(d) H_v)` with standard normal `H_v`.
    RemGaussian { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    #[serde(flatten)]
    pub kind: DisorderKind,
    pub d: u32,
}

impl DisorderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_HYPERCUBE_DIM).contains(&self.d) {
            return Err(Error::param("d", self.d as f64, "[1, 20]"));
        }
        match self.kind {
            DisorderKind::RemLikePareto { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::param("alpha", alpha, "(0, 1)"));
                }
            }
            DisorderKind::RemGaussian { beta } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::param("beta", beta, "(0, inf)"));
                }
                let alpha = rem_alpha(beta);
                if alpha >= 1.0 {
                    return Err(Error::ErgodicRegime { beta, alpha });
                }
            }
        }
        Ok(())
    }

    /// Tail index `α` of the waiting times.
    pub fn alpha(&self) -> f64 {
        match self.kind {
            DisorderKind::RemLikePareto { alpha } => alpha,
            DisorderKind::RemGaussian { beta } => rem_alpha(beta),
        }
    }

    /// Ergodic-scale speed-up `c_d`.
    pub fn c_d(&self) -> f64 {
        match self.kind {
            DisorderKind::RemLikePareto { alpha } => pareto_c_d(alpha, self.d),
            DisorderKind::RemGaussian { beta } => rem_c_d(beta, self.d),
        }
    }

    /// Raw waiting times, one per vertex.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        let n = 1usize << self.d;
        Ok((0..n).map(|_| self.draw_one(rng)).collect())
    }

    /// One raw waiting time. Assumes a validated spec.
    #[inline]
    pub fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DisorderKind::RemLikePareto { alpha } => pareto(alpha, rng),
            DisorderKind::RemGaussian { beta } => {
                let h: f64 = rng.sample(StandardNormal);
                (beta * (self.d as f64).sqrt() * h).exp()
            }
        }
    }

    pub fn sample(&self, rng: RngSpec) -> Result<ScaledEnvironment> {
        let raw = self.draw(&mut rng.rng_for(Domain::Disorder))?;
        ScaledEnvironment::from_raw(*self, raw, self.c_d(), rng)
    }
}

/// `U^{-1/α}` with `U` uniform on `(0, 1]`.
#[inline]
pub fn pareto<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    u.powf(-1.0 / alpha)
}

/// `inf{t >= 0 : t^{-α} <= 2^{-d}} = 2^{d/α}`.
pub fn pareto_threshold(alpha: f64, d: u32) -> f64 {
    (d as f64 / alpha).exp2()
}

/// `c_d = 2^{-d/α}` for the Pareto tail.
pub fn pareto_c_d(alpha: f64, d: u32) -> f64 {
    (-(d as f64) / alpha).exp2()
}

/// `c_d = exp(-(2 log 2 / α) d + log(d) / (2α))` with `α = sqrt(2 log 2)/β`.
pub fn rem_c_d(beta: f64, d: u32) -> f64 {
    let alpha = rem_alpha(beta);
    let d = d as f64;
    (-(2.0 * std::f64::consts::LN_2 / alpha) * d + d.ln() / (2.0 * alpha)).exp()
}

/// A drawn environment in rank order, with its scaled version `c_d τ̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledEnvironment {
    pub spec: DisorderSpec,
    pub ordered_means: Vec<f64>,
    pub c_d: f64,
    pub scaled_means: Vec<f64>,
    pub vertex_of_rank: Vec<u32>,
    pub rank_of_vertex: Vec<u32>,
    pub seed: RngSpec,
}

impl ScaledEnvironment {
    pub fn from_raw(spec: DisorderSpec, raw: Vec<f64>, c_d: f64, seed: RngSpec) -> Result<Self> {
        let map = build_rank_map(&raw)?;
        let scaled_means = map.means.iter().map(|m| m * c_d).collect();
        Ok(ScaledEnvironment {
            spec,
            ordered_means: map.means,
            c_d,
            scaled_means,
            vertex_of_rank: map.vertex_of_rank,
            rank_of_vertex: map.rank_of_vertex,
            seed,
        })
    }

    /// Same environment under a different speed-up (e.g. an aging scale).
    pub fn rescaled(&self, c: f64) -> ScaledEnvironment {
        ScaledEnvironment {
            c_d: c,
            scaled_means: self.ordered_means.iter().map(|m| m * c).collect(),
            ..self.clone()
        }
    }

    /// Hypercube trap model with the scaled means.
    pub fn trap_model(&self) -> TrapModelSpec {
        TrapModelSpec::from_rank_map(
            Graph::Hypercube { dim: self.spec.d },
            RankMap {
                means: self.scaled_means.clone(),
                vertex_of_rank: self.vertex_of_rank.clone(),
                rank_of_vertex: self.rank_of_vertex.clone(),
            },
        )
    }

    /// JSON summary with the top `top_k` scaled means.
    pub fn summary(&self, top_k: usize) -> EnvironmentSummary {
        EnvironmentSummary {
            disorder: self.spec,
            c_d: self.c_d,
            top_scaled_means: self.scaled_means.iter().take(top_k).copied().collect(),
            seed: self.seed,
        }
    }

    /// All scaled means in rank order as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        for m in &self.scaled_means {
            out.write_all(&m.to_le_bytes())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSummary {
    pub disorder: DisorderSpec,
    pub c_d: f64,
    pub top_scaled_means: Vec<f64>,
    pub seed: RngSpec,
}

pub fn sample_rem_like(alpha: f64, d: u32, rng: RngSpec) -> Result<ScaledEnvironment> {
    DisorderSpec {
        kind: DisorderKind::RemLikePareto { alpha },
        d,
    }
    .sample(rng)
}

pub fn sample_rem(beta: f64, d: u32, rng: RngSpec) -> Result<ScaledEnvironment> {
    DisorderSpec {
        kind: DisorderKind::RemGaussian { beta },
        d,
    }
    .sample(rng)
}

/// Hypercube trap model in a fresh environment per path, with waiting
/// times `c·τ_v` drawn the first time `v` is visited. Because the `τ_v` are
/// iid this has the annealed law of the path, and costs nothing for the
/// vertices the path never sees.
///
/// Paths are labelled by `vertex + 1`, not by rank: the environment is
/// never sorted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealedHypercube {
    pub disorder: DisorderSpec,
    pub c: f64,
}

impl AnnealedHypercube {
    pub fn new(disorder: DisorderSpec, c: f64) -> Result<Self> {
        disorder.validate()?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", c, "(0, inf)"));
        }
        Ok(AnnealedHypercube { disorder, c })
    }

    /// Path on `[0, horizon]` from a uniform start vertex.
    pub fn simulate(&self, horizon: f64, rng: RngSpec) -> Result<Trajectory> {
        if !(horizon > 0.0) {
            return Err(Error::param("horizon", horizon, "(0, inf)"));
        }
        let d = self.disorder.d;
        let mut env_rng = rng.rng_for(Domain::Disorder);
        let mut dyn_rng = rng.rng_for(Domain::Dynamics);
        let mut env: HashMap<u32, f64> = HashMap::new();
        let mut v: u32 = rng.rng_for(Domain::Start).random_range(0..1u32 << d);
        let mut b = TrajectoryBuilder::new(State::Site(v as usize + 1));
        let mut t = 0.0;
        loop {
            let tau = *env.entry(v).or_insert_with(|| self.disorder.draw_one(&mut env_rng));
            let e: f64 = dyn_rng.sample(Exp1);
            t += self.c * tau * e;
            if t > horizon {
                break;
            }
            v ^= 1 << dyn_rng.random_range(0..d);
            b.push(t, State::Site(v as usize + 1));
        }
        Ok(b.finish(horizon))
    }
}

/// `log(τ̂_x / γ̂_x)` for the top `top_k` ranks.
pub fn ergodic_scale_check(env: &ScaledEnvironment, gamma_hat: &GammaMeasure, top_k: usize) -> Vec<f64> {
    env.scaled_means
        .iter()
        .zip(gamma_hat.weights())
        .take(top_k)
        .map(|(a, b)| (a / b).ln())
        .collect()
}
