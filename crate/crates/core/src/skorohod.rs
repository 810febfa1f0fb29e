//! Comparing càdlàg paths: piecewise-linear time changes, the `φ` penalty,
//! the sup distance `ρ(f, g, λ, u)` of the `1/x`-embedded paths, and the
//! time change built from matched entrance and exit times of a set
//! `{1, ..., K}`.
//!
//! The Skorohod distance is an infimum over all time changes. Everything
//! here evaluates it for explicit candidates only, so [`rho_upper_bound`] is
//! an upper bound, not the distance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trajectory::{State, Trajectory, TrajectoryBuilder};

/// A nondecreasing piecewise-linear map of `[0, ∞)` onto itself.
///
/// Knots start at `(0, 0)`; past the last knot the map continues with
/// `final_slope > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeDistortion {
    knots: Vec<(f64, f64)>,
    final_slope: f64,
}

impl TimeDistortion {
    pub fn new(knots: Vec<(f64, f64)>, final_slope: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::TimeDistortion(m.to_string()));
        if knots.first() != Some(&(0.0, 0.0)) {
            return bad("first knot must be (0, 0)");
        }
        if !(final_slope > 0.0 && final_slope.is_finite()) {
            return bad("final slope must be positive and finite");
        }
        for w in knots.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if !(t1 > t0) || !t1.is_finite() {
                return bad("knot times must be finite and strictly increasing");
            }
            if !(v1 >= v0) || !v1.is_finite() {
                return bad("knot values must be finite and nondecreasing");
            }
        }
        Ok(TimeDistortion { knots, final_slope })
    }

    pub fn identity() -> Self {
        TimeDistortion {
            knots: vec![(0.0, 0.0)],
            final_slope: 1.0,
        }
    }

    /// `t ↦ c t`.
    pub fn linear(c: f64) -> Result<Self> {
        TimeDistortion::new(vec![(0.0, 0.0)], c)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn final_slope(&self) -> f64 {
        self.final_slope
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|k| k.0 <= t);
        let (t0, v0) = self.knots[i.max(1) - 1];
        if i >= self.knots.len() {
            return v0 + self.final_slope * (t - t0);
        }
        let (t1, v1) = self.knots[i];
        v0 + (v1 - v0) / (t1 - t0) * (t - t0)
    }

    /// `inf{t >= 0 : λ(t) >= v}`.
    pub fn inverse_at(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        let i = self.knots.partition_point(|k| k.1 < v);
        if i >= self.knots.len() {
            let (t0, v0) = *self.knots.last().expect("at least one knot");
            return t0 + (v - v0) / self.final_slope;
        }
        let (t0, v0) = self.knots[i - 1];
        let (t1, v1) = self.knots[i];
        // v0 < v <= v1, so the segment is not flat.
        t0 + (v - v0) / (v1 - v0) * (t1 - t0)
    }

    /// Slopes of the finite segments followed by the final slope.
    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .chain(std::iter::once(self.final_slope))
    }

    /// The inverse map; fails when some segment is flat.
    pub fn inverse(&self) -> Result<Self> {
        if self.knots.windows(2).any(|w| !(w[1].1 > w[0].1)) {
            return Err(Error::TimeDistortion("flat segment has no inverse".into()));
        }
        TimeDistortion::new(
            self.knots.iter().map(|&(t, v)| (v, t)).collect(),
            1.0 / self.final_slope,
        )
    }
}

/// `sup_{s<t} |log((λ_t - λ_s)/(t - s))|`.
///
/// Chord slopes of a piecewise-linear map are averages of segment slopes,
/// so the supremum is the largest `|log slope|` over segments; a flat
/// segment makes it infinite.
pub fn phi(lambda: &TimeDistortion) -> f64 {
    lambda
        .slopes()
        .map(|s| if s > 0.0 { s.ln().abs() } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// One stay in `{1, ..., K}`: entered at `entry`, left at `exit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Visit {
    pub entry: f64,
    pub exit: f64,
    /// The path was still inside at its horizon; `exit` is the horizon.
    pub exit_censored: bool,
}

/// Successive entrance/exit times of `{1, ..., K}` up to the first entrance
/// after the cut-off time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntranceExitTimes {
    /// Visits whose entrance is at or before the cut-off.
    pub visits: Vec<Visit>,
    /// The first entrance after the cut-off, `∞` if none is observed.
    pub next_entry: f64,
}

impl EntranceExitTimes {
    /// Index of the first entrance past the cut-off.
    pub fn n(&self) -> usize {
        self.visits.len() + 1
    }
}

fn all_visits(traj: &Trajectory, k: usize) -> Vec<Visit> {
    let mut out: Vec<Visit> = Vec::new();
    let mut open: Option<f64> = None;
    for seg in traj.segments() {
        let inside = seg.state.within(k);
        match (inside, open) {
            (true, None) => open = Some(seg.start),
            (false, Some(entry)) => {
                out.push(Visit {
                    entry,
                    exit: seg.start,
                    exit_censored: false,
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(entry) = open {
        out.push(Visit {
            entry,
            exit: traj.horizon(),
            exit_censored: true,
        });
    }
    out
}

/// Entrance/exit times of `{1, ..., k}` with entrances up to time `t_cut`.
pub fn entrance_exit_times(traj: &Trajectory, k: usize, t_cut: f64) -> Result<EntranceExitTimes> {
    if !(t_cut >= 0.0 && t_cut <= traj.horizon()) {
        return Err(Error::param("T", t_cut, "[0, horizon]"));
    }
    let mut visits = all_visits(traj, k);
    let cut = visits.partition_point(|v| v.entry <= t_cut);
    let next_entry = visits.get(cut).map_or(f64::INFINITY, |v| v.entry);
    visits.truncate(cut);
    Ok(EntranceExitTimes { visits, next_entry })
}

/// The first `count` visits of `{1, ..., k}` and the entrance after them.
pub fn entrance_exit_times_count(traj: &Trajectory, k: usize, count: usize) -> EntranceExitTimes {
    let mut visits = all_visits(traj, k);
    let next_entry = visits.get(count).map_or(f64::INFINITY, |v| v.entry);
    visits.truncate(count);
    EntranceExitTimes { visits, next_entry }
}

/// Knot sequence `(0,0), (τ_1,ξ_1), (τ*_1,ξ*_1), ..., (τ_N,ξ_N)`.
fn matched_points(source: &EntranceExitTimes, target: &EntranceExitTimes) -> Vec<(f64, f64)> {
    let mut pts = vec![(0.0, 0.0)];
    for (a, b) in source.visits.iter().zip(&target.visits) {
        pts.push((a.entry, b.entry));
        pts.push((a.exit, b.exit));
    }
    if source.next_entry.is_finite() && target.next_entry.is_finite() {
        pts.push((source.next_entry, target.next_entry));
    }
    pts
}

/// The piecewise-linear time change sending the source's entrance and exit
/// times to the target's, with slope 1 after the last matched point.
///
/// A zero-length source interval matched to a zero-length target interval
/// counts as slope 1 (`0/0 = 1`) and adds no knot. When either side never
/// re-enters after the cut-off, the map continues with slope 1 from the
/// last matched exit.
pub fn build_time_distortion(
    source: &EntranceExitTimes,
    target: &EntranceExitTimes,
) -> Result<TimeDistortion> {
    if source.n() != target.n() {
        return Err(Error::MismatchedN {
            source_n: source.n(),
            target_n: target.n(),
        });
    }
    let pts = matched_points(source, target);
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (t, v) in pts {
        match knots.last() {
            Some(&(t0, v0)) if t == t0 => {
                if v != v0 {
                    return Err(Error::TimeDistortion(format!(
                        "zero-length source interval at t={t} maps to [{v0}, {v}]"
                    )));
                }
            }
            _ => knots.push((t, v)),
        }
    }
    TimeDistortion::new(knots, 1.0)
}

/// `max_j |log((ξ_j - ξ*_{j-1})/(τ_j - τ*_{j-1}))| ∨ max_j |log((ξ*_j - ξ_j)/(τ*_j - τ_j))|`
/// over the matched pairs, with `0/0 = 1`.
pub fn distortion_bound(source: &EntranceExitTimes, target: &EntranceExitTimes) -> Result<f64> {
    if source.n() != target.n() {
        return Err(Error::MismatchedN {
            source_n: source.n(),
            target_n: target.n(),
        });
    }
    let term = |dv: f64, dt: f64| -> f64 {
        if dt == 0.0 && dv == 0.0 {
            0.0
        } else {
            let s = dv / dt;
            if s > 0.0 {
                s.ln().abs()
            } else {
                f64::INFINITY
            }
        }
    };
    let pts = matched_points(source, target);
    Ok(pts
        .windows(2)
        .map(|w| term(w[1].1 - w[0].1, w[1].0 - w[0].0))
        .fold(0.0, f64::max))
}

/// Time change matching the visits of `source` up to `t_cut` with the same
/// number of visits of `target`.
pub fn matched_time_distortion(
    source: &Trajectory,
    target: &Trajectory,
    k: usize,
    t_cut: f64,
) -> Result<TimeDistortion> {
    let s = entrance_exit_times(source, k, t_cut)?;
    let t = entrance_exit_times_count(target, k, s.visits.len());
    if t.visits.len() < s.visits.len() {
        return Err(Error::MismatchedN {
            source_n: s.n(),
            target_n: t.n(),
        });
    }
    build_time_distortion(&s, &t)
}

/// `g = f ∘ λ^{-1}`: the path `f` run on the clock `λ`.
pub fn time_changed(f: &Trajectory, lambda: &TimeDistortion) -> Trajectory {
    let mut b = TrajectoryBuilder::new(f.initial());
    for j in f.jumps() {
        b.push(lambda.eval(j.time), j.state);
    }
    b.finish(lambda.eval(f.horizon()))
}

/// `sup_t |1/f(t∧u) - 1/g(λ(t)∧u)|`, exact for step paths.
pub fn rho_at(f: &Trajectory, g: &Trajectory, lambda: &TimeDistortion, u: f64) -> f64 {
    let h = |t: f64| -> f64 {
        let a = f.value_at(t.min(u));
        let b = g.value_at(lambda.eval(t).min(u));
        (a.inverse() - b.inverse()).abs()
    };
    // The integrand is right-continuous and piecewise constant in t between
    // these breakpoints, so its sup is attained inside some interval. Reading
    // interval midpoints keeps rounding at a composed jump time from
    // selecting the wrong side of the jump.
    let mut pts = vec![0.0, u, lambda.inverse_at(u)];
    pts.extend(f.jumps().iter().map(|j| j.time).filter(|&t| t < u));
    pts.extend(g.jumps().iter().filter(|j| j.time < u).map(|j| lambda.inverse_at(j.time)));
    let pts = merge_close(pts);
    let last = *pts.last().unwrap();
    pts.windows(2)
        .map(|w| h(0.5 * (w[0] + w[1])))
        .fold(h(last + 1.0), f64::max)
}

/// Sorts and drops points within a relative `1e-12` of their predecessor:
/// such gaps come from rounding, not from the paths.
fn merge_close(mut pts: Vec<f64>) -> Vec<f64> {
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|b, a| *b - *a <= 1e-12 * (1.0 + a.abs()));
    pts
}

/// Breakpoints in `u` of `ρ(f, g, λ, u)` inside `(0, upper)`.
fn u_breakpoints(f: &Trajectory, g: &Trajectory, lambda: &TimeDistortion, upper: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = vec![0.0, upper];
    for j in f.jumps() {
        pts.push(j.time);
        pts.push(lambda.eval(j.time));
    }
    for j in g.jumps() {
        pts.push(j.time);
        pts.push(lambda.inverse_at(j.time));
    }
    pts.retain(|&u| (0.0..=upper).contains(&u));
    merge_close(pts)
}

fn usable_horizon(f: &Trajectory, g: &Trajectory) -> Result<f64> {
    let h = f.horizon().min(g.horizon());
    if h > 0.0 {
        Ok(h)
    } else {
        Err(Error::Trajectory("empty-time path has no distance".into()))
    }
}

/// `∫_0^H e^{-u} ρ(f, g, λ, u) du` with `H` the shorter horizon, computed
/// exactly on the piecewise-constant structure in `u`. The neglected tail is
/// at most `e^{-H}`.
pub fn rho_given_lambda(f: &Trajectory, g: &Trajectory, lambda: &TimeDistortion) -> Result<f64> {
    let upper = usable_horizon(f, g)?;
    let pts = u_breakpoints(f, g, lambda, upper);
    Ok(pts
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            rho_at(f, g, lambda, mid) * ((-w[0]).exp() - (-w[1]).exp())
        })
        .sum())
}

/// Midpoint-rule version of [`rho_given_lambda`] with `quad_points` nodes,
/// for validating the exact evaluation.
pub fn rho_given_lambda_quadrature(
    f: &Trajectory,
    g: &Trajectory,
    lambda: &TimeDistortion,
    quad_points: usize,
) -> Result<f64> {
    let upper = usable_horizon(f, g)?;
    let du = upper / quad_points as f64;
    Ok((0..quad_points)
        .map(|i| {
            let u = (i as f64 + 0.5) * du;
            (-u).exp() * rho_at(f, g, lambda, u) * du
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoBound {
    pub value: f64,
    /// Which candidate attained the minimum.
    pub best: usize,
    pub phi: f64,
    pub integral: f64,
}

/// `min_λ φ(λ) ∨ ∫ e^{-u} ρ(f, g, λ, u) du` over the supplied candidates.
/// This bounds the Skorohod distance from above.
pub fn rho_upper_bound(f: &Trajectory, g: &Trajectory, candidates: &[TimeDistortion]) -> Result<RhoBound> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate time distortions"));
    }
    let mut best: Option<RhoBound> = None;
    for (i, lambda) in candidates.iter().enumerate() {
        let p = phi(lambda);
        let integral = rho_given_lambda(f, g, lambda)?;
        let value = p.max(integral);
        if best.is_none_or(|b| value < b.value) {
            best = Some(RhoBound {
                value,
                best: i,
                phi: p,
                integral,
            });
        }
    }
    Ok(best.expect("nonempty"))
}

/// `1/x` of a state, for callers working with raw values.
pub fn embed(state: State) -> f64 {
    state.inverse()
}
