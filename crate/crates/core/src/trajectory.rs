//! Càdlàg step paths on `{1, 2, ...} ∪ {∞}` in jump-list form.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the extended positive integers. Sites are 1-based ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    Site(usize),
    Infinity,
}

impl State {
    /// The `1/x` embedding into `[0, 1]`, with `1/∞ = 0`.
    #[inline]
    pub fn inverse(self) -> f64 {
        match self {
            State::Site(x) => 1.0 / x as f64,
            State::Infinity => 0.0,
        }
    }

    pub fn site(self) -> Option<usize> {
        match self {
            State::Site(x) => Some(x),
            State::Infinity => None,
        }
    }

    /// True when the state is a site in `{1, ..., max}`.
    #[inline]
    pub fn within(self, max: usize) -> bool {
        matches!(self, State::Site(x) if x <= max)
    }
}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (State::Site(a), State::Site(b)) => a.cmp(b),
            (State::Site(_), State::Infinity) => Ordering::Less,
            (State::Infinity, State::Site(_)) => Ordering::Greater,
            (State::Infinity, State::Infinity) => Ordering::Equal,
        }
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Site(x) => write!(f, "{x}"),
            State::Infinity => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub state: State,
}

/// A right-continuous step path on `[0, horizon]`.
///
/// A trajectory with `horizon == 0` is the empty-time path produced by
/// restricting to a set the path never visits; see [`Trajectory::is_empty_time`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    initial: State,
    jumps: Vec<Jump>,
    horizon: f64,
}

/// One maximal constant piece `[start, end)` of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub state: State,
}

impl Trajectory {
    pub fn new(initial: State, jumps: Vec<Jump>, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::Trajectory(format!("horizon {horizon} must be finite and >= 0")));
        }
        if horizon == 0.0 && !jumps.is_empty() {
            return Err(Error::Trajectory("empty-time trajectory with jumps".into()));
        }
        let mut prev_t = 0.0;
        let mut prev_s = initial;
        for (i, j) in jumps.iter().enumerate() {
            if !(j.time > prev_t) {
                return Err(Error::Trajectory(format!(
                    "jump {i} at t={} does not follow t={prev_t}",
                    j.time
                )));
            }
            if j.time > horizon {
                return Err(Error::Trajectory(format!(
                    "jump {i} at t={} beyond horizon {horizon}",
                    j.time
                )));
            }
            if j.state == prev_s {
                return Err(Error::Trajectory(format!("jump {i} does not change state")));
            }
            if let State::Site(0) = j.state {
                return Err(Error::Trajectory("site 0 is not a state".into()));
            }
            prev_t = j.time;
            prev_s = j.state;
        }
        if let State::Site(0) = initial {
            return Err(Error::Trajectory("site 0 is not a state".into()));
        }
        Ok(Trajectory {
            initial,
            jumps,
            horizon,
        })
    }

    pub fn constant(state: State, horizon: f64) -> Result<Self> {
        Trajectory::new(state, Vec::new(), horizon)
    }

    /// Builds from `(time, state)` pairs; convenient in tests.
    pub fn from_pairs(initial: State, jumps: &[(f64, State)], horizon: f64) -> Result<Self> {
        Trajectory::new(
            initial,
            jumps
                .iter()
                .map(|&(time, state)| Jump { time, state })
                .collect(),
            horizon,
        )
    }

    pub(crate) fn from_parts_unchecked(initial: State, jumps: Vec<Jump>, horizon: f64) -> Self {
        debug_assert!(Trajectory::new(initial, jumps.clone(), horizon).is_ok());
        Trajectory {
            initial,
            jumps,
            horizon,
        }
    }

    pub fn initial(&self) -> State {
        self.initial
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_empty_time(&self) -> bool {
        self.horizon == 0.0
    }

    /// State at time `t` (càdlàg: the last jump at or before `t` wins).
    /// Times past the horizon read the final state.
    pub fn value_at(&self, t: f64) -> State {
        let idx = self.jumps.partition_point(|j| j.time <= t);
        if idx == 0 {
            self.initial
        } else {
            self.jumps[idx - 1].state
        }
    }

    pub fn final_state(&self) -> State {
        self.jumps.last().map_or(self.initial, |j| j.state)
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let starts = std::iter::once((0.0, self.initial))
            .chain(self.jumps.iter().map(|j| (j.time, j.state)));
        let ends = self
            .jumps
            .iter()
            .map(|j| j.time)
            .chain(std::iter::once(self.horizon));
        starts.zip(ends).map(|((start, state), end)| Segment { start, end, state })
    }

    /// Largest state visited, `Infinity` dominating every site.
    pub fn max_state(&self) -> State {
        self.jumps
            .iter()
            .map(|j| j.state)
            .fold(self.initial, State::max)
    }

    /// Time-changed path observed only while inside `{1, ..., subset_max}`.
    ///
    /// Intervals spent outside the subset are cut out and the remaining
    /// pieces concatenated. A path that never enters the subset maps to the
    /// empty-time trajectory.
    pub fn restrict(&self, subset_max: usize) -> Trajectory {
        if self.is_empty_time() || self.max_state().within(subset_max) {
            return self.clone();
        }
        let mut builder: Option<TrajectoryBuilder> = None;
        let mut clock = 0.0;
        for seg in self.segments() {
            if !seg.state.within(subset_max) {
                continue;
            }
            match builder.as_mut() {
                None => builder = Some(TrajectoryBuilder::new(seg.state)),
                Some(b) => b.push(clock, seg.state),
            }
            clock += seg.end - seg.start;
        }
        match builder {
            Some(b) => b.finish(clock),
            None => Trajectory {
                initial: State::Infinity,
                jumps: Vec::new(),
                horizon: 0.0,
            },
        }
    }

    /// CSV with header `t,state`: a row at `t = 0` then one row per jump.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "state"])?;
        w.write_record([format_time(0.0), self.initial.to_string()])?;
        for j in &self.jumps {
            w.write_record([format_time(j.time), j.state.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_time(t: f64) -> String {
    format!("{t}")
}

/// Accumulates jumps while enforcing the trajectory invariants.
///
/// A push at the same time as the previous jump overwrites it (the
/// intermediate state was held for zero time); a push to the current state
/// is dropped.
#[derive(Debug, Clone)]
pub struct TrajectoryBuilder {
    initial: State,
    jumps: Vec<Jump>,
}

impl TrajectoryBuilder {
    pub fn new(initial: State) -> Self {
        TrajectoryBuilder {
            initial,
            jumps: Vec::new(),
        }
    }

    pub fn current(&self) -> State {
        self.jumps.last().map_or(self.initial, |j| j.state)
    }

    pub fn push(&mut self, time: f64, state: State) {
        if let Some(last) = self.jumps.last().copied() {
            if time <= last.time {
                self.jumps.pop();
                if self.current() != state {
                    self.jumps.push(Jump {
                        time: last.time,
                        state,
                    });
                }
                return;
            }
        } else if time <= 0.0 {
            self.initial = state;
            return;
        }
        if state != self.current() {
            self.jumps.push(Jump { time, state });
        }
    }

    /// Drops jumps after `horizon` and closes the path there.
    pub fn finish(mut self, horizon: f64) -> Trajectory {
        while self.jumps.last().is_some_and(|j| j.time > horizon) {
            self.jumps.pop();
        }
        Trajectory::from_parts_unchecked(self.initial, self.jumps, horizon)
    }
}
