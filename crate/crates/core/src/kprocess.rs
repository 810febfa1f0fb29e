//! The K process with parameter `γ`, sampled through its Poisson-clock
//! construction at a finite truncation level `M`.
//!
//! Sites `1..=M` carry independent rate-1 Poisson clocks in *secondary*
//! time. The j-th ring of site `x` opens a sojourn at `x` of length
//! `γ_x · T` with `T ~ Exp(1)`, and the primary clock `Γ` is the running
//! sum of these lengths (plus `γ_y · T_0` for a finite starting state `y`).

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSpec;
use crate::trajectory::{State, Trajectory, TrajectoryBuilder};

/// A finite measure on `{1, 2, ...}` given by non-increasing weights.
///
/// `tail_mass` is the mass lying beyond the materialized atoms; it is `0`
/// for genuinely finite sequences and an estimate for lazily extended ones.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMeasure {
    weights: Vec<f64>,
    tail_mass: f64,
}

impl GammaMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        GammaMeasure::with_tail(weights, 0.0)
    }

    pub fn with_tail(weights: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("gamma weights"));
        }
        if let Some(index) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::NonPositiveWeight {
                index,
                value: weights[index],
            });
        }
        if let Some(i) = weights.windows(2).position(|p| p[1] > p[0]) {
            return Err(Error::NotNonIncreasing { index: i + 1 });
        }
        if !(tail_mass >= 0.0 && tail_mass.is_finite()) {
            return Err(Error::param("tail_mass", tail_mass, "[0, inf)"));
        }
        let atoms: f64 = weights.iter().sum();
        if !atoms.is_finite() {
            return Err(Error::param("total mass", atoms, "finite"));
        }
        Ok(GammaMeasure { weights, tail_mass })
    }

    /// `γ_x = ratio^x` for `x = 1..=count`, with the exact geometric tail.
    pub fn geometric(ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::param("ratio", ratio, "(0, 1)"));
        }
        let weights: Vec<f64> = (1..=count as i32).map(|x| ratio.powi(x)).collect();
        let tail = ratio.powi(count as i32) * ratio / (1.0 - ratio);
        GammaMeasure::with_tail(weights, tail)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `γ_x` for `x >= 1`; zero beyond the materialized atoms and at `∞`.
    pub fn weight(&self, state: State) -> f64 {
        match state {
            State::Site(x) if x >= 1 && x <= self.weights.len() => self.weights[x - 1],
            _ => 0.0,
        }
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.tail_mass
    }

    /// `Σ_{x > m} γ_x`, tail included.
    pub fn mass_beyond(&self, m: usize) -> f64 {
        self.weights.iter().skip(m).sum::<f64>() + self.tail_mass
    }

    /// The first `m` weights normalized to a probability vector.
    pub fn normalized(&self, m: usize) -> Vec<f64> {
        let w = &self.weights[..m.min(self.weights.len())];
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        GammaMeasure::with_tail(
            self.weights.iter().map(|w| w * c).collect(),
            self.tail_mass * c,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.weights).expect("f64 vector serializes")
    }

    /// Parses a JSON array of weights, validating positivity and order.
    pub fn from_json(s: &str) -> Result<Self> {
        let w: Vec<f64> = serde_json::from_str(s)?;
        GammaMeasure::new(w)
    }
}

impl Serialize for GammaMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.weights.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GammaMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Vec::<f64>::deserialize(d)?;
        GammaMeasure::new(w).map_err(serde::de::Error::custom)
    }
}

/// One ring of a site clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KClockEvent {
    pub site: usize,
    pub secondary_time: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KProcessSample {
    pub trajectory: Trajectory,
    pub truncation_level: usize,
    /// The requested start, which may be `∞` even though `∞` is held for
    /// zero time and so never shows in the trajectory.
    pub initial_state: State,
}

/// Merged site clocks at truncation `m`: yields rings in secondary-time order.
struct MergedClocks<'a> {
    weights: &'a [f64],
    secondary: f64,
}

impl<'a> MergedClocks<'a> {
    #[inline]
    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> KClockEvent {
        let m = self.weights.len();
        let gap: f64 = rng.sample(Exp1);
        self.secondary += gap / m as f64;
        let site = rng.random_range(1..=m);
        let t: f64 = rng.sample(Exp1);
        KClockEvent {
            site,
            secondary_time: self.secondary,
            duration: self.weights[site - 1] * t,
        }
    }
}

fn check_level(gamma: &GammaMeasure, m: usize, y0: State) -> Result<()> {
    if m == 0 {
        return Err(Error::param("M", 0.0, "[1, inf)"));
    }
    if m > gamma.len() {
        return Err(Error::RankOutOfRange {
            rank: m,
            size: gamma.len(),
        });
    }
    match y0 {
        State::Site(y) if y == 0 || y > m => Err(Error::RankOutOfRange { rank: y, size: m }),
        _ => Ok(()),
    }
}

/// Duration of the initial sojourn `γ_{y0} T_0` (zero when `y0 = ∞`) and
/// the first `count` clock rings.
pub fn clock_events<R: Rng + ?Sized>(
    gamma: &GammaMeasure,
    m: usize,
    y0: State,
    count: usize,
    rng: &mut R,
) -> Result<(f64, Vec<KClockEvent>)> {
    check_level(gamma, m, y0)?;
    let initial = initial_duration(gamma, y0, rng);
    let mut clocks = MergedClocks {
        weights: &gamma.weights[..m],
        secondary: 0.0,
    };
    Ok((initial, (0..count).map(|_| clocks.next(rng)).collect()))
}

fn initial_duration<R: Rng + ?Sized>(gamma: &GammaMeasure, y0: State, rng: &mut R) -> f64 {
    match y0 {
        State::Site(_) => {
            let t0: f64 = rng.sample(Exp1);
            gamma.weight(y0) * t0
        }
        State::Infinity => 0.0,
    }
}

/// Samples the level-`m` K process on `[0, horizon]` from `y0`.
pub fn sample_k_process<R: Rng + ?Sized>(
    gamma: &GammaMeasure,
    m: usize,
    y0: State,
    horizon: f64,
    rng: &mut R,
) -> Result<KProcessSample> {
    check_level(gamma, m, y0)?;
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", horizon, "(0, inf)"));
    }
    let mut clock = initial_duration(gamma, y0, rng);
    let mut b = TrajectoryBuilder::new(y0);
    let mut clocks = MergedClocks {
        weights: &gamma.weights[..m],
        secondary: 0.0,
    };
    while clock <= horizon {
        let ev = clocks.next(rng);
        b.push(clock, State::Site(ev.site));
        clock += ev.duration;
    }
    Ok(KProcessSample {
        trajectory: b.finish(horizon),
        truncation_level: m,
        initial_state: y0,
    })
}

pub fn sample_k_process_truncated(
    gamma: &GammaMeasure,
    m: usize,
    y0: State,
    horizon: f64,
    rng: RngSpec,
) -> Result<KProcessSample> {
    sample_k_process(gamma, m, y0, horizon, &mut rng.rng())
}

/// Smallest `M` with `Σ_{x > M} γ_x <= epsilon`.
pub fn choose_truncation(gamma: &GammaMeasure, epsilon: f64) -> Result<usize> {
    let total = gamma.total_mass();
    if !(epsilon > 0.0 && epsilon < total) {
        return Err(Error::Parameter {
            name: "epsilon",
            value: epsilon,
            range: "(0, total_mass)",
        });
    }
    if gamma.tail_mass > epsilon {
        return Err(Error::UnreachableEpsilon {
            epsilon,
            tail: gamma.tail_mass,
        });
    }
    // Walk from the end so the tail sum is accumulated smallest-first.
    let mut tail = gamma.tail_mass;
    let mut m = gamma.len();
    while m > 1 && tail + gamma.weights[m - 1] <= epsilon {
        tail += gamma.weights[m - 1];
        m -= 1;
    }
    Ok(m)
}

/// The largest `count` jumps on `[0, 1]` of an `α`-stable subordinator,
/// `Γ_i^{-1/α}` with `Γ_i` the arrivals of a unit Poisson process.
///
/// The mass beyond the last atom is set to its mean-field estimate
/// `α/(1-α) · Γ_count^{1 - 1/α}`.
pub fn sample_stable_gamma<R: Rng + ?Sized>(
    alpha: f64,
    count: usize,
    rng: &mut R,
) -> Result<GammaMeasure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", alpha, "(0, 1)"));
    }
    if count == 0 {
        return Err(Error::param("count", 0.0, "[1, inf)"));
    }
    let mut arrival = 0.0f64;
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        let e: f64 = rng.sample(Exp1);
        arrival += e;
        weights.push(arrival.powf(-1.0 / alpha));
    }
    let tail = alpha / (1.0 - alpha) * arrival.powf(1.0 - 1.0 / alpha);
    GammaMeasure::with_tail(weights, tail)
}

pub fn sample_stable_gamma_seeded(alpha: f64, count: usize, rng: RngSpec) -> Result<GammaMeasure> {
    sample_stable_gamma(alpha, count, &mut rng.rng_for(crate::rng::Domain::Disorder))
}
