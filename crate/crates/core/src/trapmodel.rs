//! Symmetric trap models on the hypercube `{0,1}^d` and on the complete
//! graph, simulated in rank coordinates.
//!
//! Vertices are relabelled by decreasing mean waiting time: rank 1 is the
//! deepest trap. The hypercube walk flips one of the `d` coordinates
//! uniformly; the complete-graph walk picks a uniform state among all `M`,
//! itself included, which makes it equal in law to the truncated K process.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSpec;
use crate::trajectory::{State, Trajectory, TrajectoryBuilder};

/// Largest supported hypercube dimension (2^20 states).
pub const MAX_HYPERCUBE_DIM: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn flip(self, coordinate: u32) -> VertexId {
        VertexId(self.0 ^ (1 << coordinate))
    }

    pub fn hamming(self, other: VertexId) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Graph {
    Hypercube { dim: u32 },
    Complete { size: usize },
}

impl Graph {
    pub fn num_states(&self) -> usize {
        match *self {
            Graph::Hypercube { dim } => 1usize << dim,
            Graph::Complete { size } => size,
        }
    }
}

/// Decreasing rearrangement of per-vertex weights and its permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMap {
    pub means: Vec<f64>,
    /// `vertex_of_rank[r - 1]` is the vertex holding rank `r`.
    pub vertex_of_rank: Vec<u32>,
    /// `rank_of_vertex[v]` is the 1-based rank of vertex `v`.
    pub rank_of_vertex: Vec<u32>,
}

/// Sorts weights in decreasing order; ties go to the smaller vertex index.
pub fn build_rank_map(gamma_by_vertex: &[f64]) -> Result<RankMap> {
    if gamma_by_vertex.is_empty() {
        return Err(Error::Empty("gamma_by_vertex"));
    }
    check_positive(gamma_by_vertex)?;
    let mut order: Vec<u32> = (0..gamma_by_vertex.len() as u32).collect();
    order.sort_by(|&a, &b| {
        gamma_by_vertex[b as usize]
            .total_cmp(&gamma_by_vertex[a as usize])
            .then(a.cmp(&b))
    });
    let means = order.iter().map(|&v| gamma_by_vertex[v as usize]).collect();
    let mut rank_of_vertex = vec![0u32; order.len()];
    for (r, &v) in order.iter().enumerate() {
        rank_of_vertex[v as usize] = r as u32 + 1;
    }
    Ok(RankMap {
        means,
        vertex_of_rank: order,
        rank_of_vertex,
    })
}

fn check_positive(w: &[f64]) -> Result<()> {
    match w.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        Some(index) => Err(Error::NonPositiveWeight {
            index,
            value: w[index],
        }),
        None => Ok(()),
    }
}

fn check_non_increasing(w: &[f64]) -> Result<()> {
    match w.windows(2).position(|p| p[1] > p[0]) {
        Some(i) => Err(Error::NotNonIncreasing { index: i + 1 }),
        None => Ok(()),
    }
}

fn hypercube_dim(len: usize) -> Result<u32> {
    if len.is_power_of_two() {
        let d = len.trailing_zeros();
        if (1..=MAX_HYPERCUBE_DIM).contains(&d) {
            return Ok(d);
        }
    }
    Err(Error::BadHypercubeSize {
        len,
        max: MAX_HYPERCUBE_DIM,
    })
}

/// An immutable trap model: graph, ranked means and rank/vertex maps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapModelSpec {
    graph: Graph,
    means: Vec<f64>,
    vertex_of_rank: Vec<u32>,
    rank_of_vertex: Vec<u32>,
}

/// Initial law for hitting problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartLaw {
    Rank(usize),
    /// Uniform over all ranks outside the target set, drawn per replica.
    UniformOutsideTarget,
}

impl From<usize> for StartLaw {
    fn from(rank: usize) -> Self {
        StartLaw::Rank(rank)
    }
}

/// Frequencies of the first target rank hit by the embedded chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingDistribution {
    pub targets: Vec<usize>,
    pub counts: Vec<u64>,
    pub replicas: u64,
}

impl HittingDistribution {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.replicas as f64)
            .collect()
    }

    /// `max_y |freq(y) - 1/|J||`.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.targets.len() as f64;
        self.frequencies()
            .into_iter()
            .map(|f| (f - u).abs())
            .fold(0.0, f64::max)
    }
}

/// A sojourn of the jump process: the rank held and for how long.
/// Self-jumps on the complete graph start a new sojourn at the same rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sojourn {
    pub rank: usize,
    pub duration: f64,
}

/// A path in vertex coordinates, used to cross-check the rank relabelling.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPath {
    pub initial: VertexId,
    pub jumps: Vec<(f64, VertexId)>,
    pub horizon: f64,
}

impl VertexPath {
    pub fn to_ranks(&self, spec: &TrapModelSpec) -> Trajectory {
        let mut b = TrajectoryBuilder::new(State::Site(spec.rank_of(self.initial)));
        for &(t, v) in &self.jumps {
            b.push(t, State::Site(spec.rank_of(v)));
        }
        b.finish(self.horizon)
    }
}

impl TrapModelSpec {
    /// Hypercube model from per-vertex mean waiting times (length `2^d`).
    pub fn hypercube(gamma_by_vertex: &[f64]) -> Result<Self> {
        let dim = hypercube_dim(gamma_by_vertex.len())?;
        let map = build_rank_map(gamma_by_vertex)?;
        Ok(TrapModelSpec {
            graph: Graph::Hypercube { dim },
            means: map.means,
            vertex_of_rank: map.vertex_of_rank,
            rank_of_vertex: map.rank_of_vertex,
        })
    }

    /// Hypercube model from means already in rank order, placed on the
    /// vertices by a uniformly random permutation.
    pub fn hypercube_ranked<R: Rng + ?Sized>(means: Vec<f64>, placement: &mut R) -> Result<Self> {
        let dim = hypercube_dim(means.len())?;
        check_positive(&means)?;
        check_non_increasing(&means)?;
        let mut vertex_of_rank: Vec<u32> = (0..means.len() as u32).collect();
        vertex_of_rank.shuffle(placement);
        let mut rank_of_vertex = vec![0u32; means.len()];
        for (r, &v) in vertex_of_rank.iter().enumerate() {
            rank_of_vertex[v as usize] = r as u32 + 1;
        }
        Ok(TrapModelSpec {
            graph: Graph::Hypercube { dim },
            means,
            vertex_of_rank,
            rank_of_vertex,
        })
    }

    /// Complete graph on `gamma.len()` states; weights are sorted into rank
    /// order like the hypercube case.
    pub fn complete(gamma: &[f64]) -> Result<Self> {
        let map = build_rank_map(gamma)?;
        Ok(TrapModelSpec {
            graph: Graph::Complete { size: gamma.len() },
            means: map.means,
            vertex_of_rank: map.vertex_of_rank,
            rank_of_vertex: map.rank_of_vertex,
        })
    }

    pub(crate) fn from_rank_map(graph: Graph, map: RankMap) -> Self {
        TrapModelSpec {
            graph,
            means: map.means,
            vertex_of_rank: map.vertex_of_rank,
            rank_of_vertex: map.rank_of_vertex,
        }
    }

    pub fn graph(&self) -> Graph {
        self.graph
    }

    pub fn num_states(&self) -> usize {
        self.means.len()
    }

    /// Means in rank order; `means()[r - 1]` belongs to rank `r`.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn mean_of_rank(&self, rank: usize) -> f64 {
        self.means[rank - 1]
    }

    pub fn vertex_of(&self, rank: usize) -> VertexId {
        VertexId(self.vertex_of_rank[rank - 1])
    }

    pub fn rank_of(&self, v: VertexId) -> usize {
        self.rank_of_vertex[v.0 as usize] as usize
    }

    /// Mean waiting time of a vertex, `means ∘ rank_of_vertex`.
    pub fn mean_of_vertex(&self, v: VertexId) -> f64 {
        self.mean_of_rank(self.rank_of(v))
    }

    fn check_rank(&self, rank: usize) -> Result<()> {
        if rank == 0 || rank > self.num_states() {
            Err(Error::RankOutOfRange {
                rank,
                size: self.num_states(),
            })
        } else {
            Ok(())
        }
    }

    /// One step of the embedded chain from `rank`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, rank: usize, rng: &mut R) -> usize {
        match self.graph {
            Graph::Hypercube { dim } => {
                let v = self.vertex_of_rank[rank - 1];
                let k = rng.random_range(0..dim);
                self.rank_of_vertex[(v ^ (1 << k)) as usize] as usize
            }
            Graph::Complete { size } => rng.random_range(1..=size),
        }
    }

    /// Simulates the rank-coordinate process on `[0, horizon]`.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        start_rank: usize,
        horizon: f64,
        rng: &mut R,
    ) -> Result<Trajectory> {
        self.check_rank(start_rank)?;
        if !(horizon > 0.0) {
            return Err(Error::param("horizon", horizon, "(0, inf)"));
        }
        let mut b = TrajectoryBuilder::new(State::Site(start_rank));
        let mut x = start_rank;
        let mut t = 0.0;
        loop {
            let e: f64 = rng.sample(Exp1);
            t += self.means[x - 1] * e;
            if t > horizon {
                break;
            }
            x = self.step(x, rng);
            b.push(t, State::Site(x));
        }
        Ok(b.finish(horizon))
    }

    /// State at time `t`; draws the same random numbers as
    /// [`simulate`](Self::simulate) with horizon `t` but keeps no path.
    pub fn state_at<R: Rng + ?Sized>(&self, start_rank: usize, t: f64, rng: &mut R) -> Result<usize> {
        self.check_rank(start_rank)?;
        if !(t > 0.0) {
            return Err(Error::param("t", t, "(0, inf)"));
        }
        let mut x = start_rank;
        let mut clock = 0.0;
        loop {
            let e: f64 = rng.sample(Exp1);
            clock += self.means[x - 1] * e;
            if clock > t {
                return Ok(x);
            }
            x = self.step(x, rng);
        }
    }

    /// The first `count` sojourns (the initial one included), without
    /// merging self-jumps.
    pub fn sojourns<R: Rng + ?Sized>(
        &self,
        start_rank: usize,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<Sojourn>> {
        self.check_rank(start_rank)?;
        let mut out = Vec::with_capacity(count);
        let mut x = start_rank;
        for i in 0..count {
            if i > 0 {
                x = self.step(x, rng);
            }
            let e: f64 = rng.sample(Exp1);
            out.push(Sojourn {
                rank: x,
                duration: self.means[x - 1] * e,
            });
        }
        Ok(out)
    }

    /// Simulates in vertex coordinates with means `means ∘ rank_of_vertex`.
    /// Hypercube only.
    pub fn simulate_vertices<R: Rng + ?Sized>(
        &self,
        start: VertexId,
        horizon: f64,
        rng: &mut R,
    ) -> Result<VertexPath> {
        let Graph::Hypercube { dim } = self.graph else {
            return Err(Error::param("graph", f64::NAN, "hypercube"));
        };
        if start.0 as usize >= self.num_states() {
            return Err(Error::RankOutOfRange {
                rank: start.0 as usize,
                size: self.num_states(),
            });
        }
        let mut v = start;
        let mut t = 0.0;
        let mut jumps = Vec::new();
        loop {
            let e: f64 = rng.sample(Exp1);
            t += self.mean_of_vertex(v) * e;
            if t > horizon {
                break;
            }
            v = v.flip(rng.random_range(0..dim));
            jumps.push((t, v));
        }
        Ok(VertexPath {
            initial: start,
            jumps,
            horizon,
        })
    }

    /// First target rank reached by the embedded chain; holding times are
    /// never sampled.
    pub fn hit<R: Rng + ?Sized>(&self, start_rank: usize, is_target: &[bool], rng: &mut R) -> usize {
        let mut x = start_rank;
        while !is_target[x - 1] {
            x = self.step(x, rng);
        }
        x
    }
}

/// Replica-seeded trajectory of the rank-coordinate process.
pub fn simulate_trap_trajectory(
    spec: &TrapModelSpec,
    start_rank: usize,
    horizon: f64,
    rng: RngSpec,
) -> Result<Trajectory> {
    spec.simulate(start_rank, horizon, &mut rng.rng())
}

/// Alias for [`Trajectory::restrict`].
pub fn restrict_trajectory(traj: &Trajectory, subset_max: usize) -> Trajectory {
    traj.restrict(subset_max)
}

/// Empirical entrance law of the embedded chain into `target_ranks`.
///
/// Replica `i` uses `RngSpec::new(rng.master_seed, i)`.
pub fn entrance_hitting_distribution(
    spec: &TrapModelSpec,
    target_ranks: &[usize],
    start: impl Into<StartLaw>,
    replicas: u64,
    rng: RngSpec,
) -> Result<HittingDistribution> {
    let start = start.into();
    if target_ranks.is_empty() {
        return Err(Error::Empty("target_ranks"));
    }
    if replicas == 0 {
        return Err(Error::param("replicas", 0.0, "[1, inf)"));
    }
    let n = spec.num_states();
    let mut targets: Vec<usize> = target_ranks.to_vec();
    targets.sort_unstable();
    targets.dedup();
    let mut is_target = vec![false; n];
    for &r in &targets {
        spec.check_rank(r)?;
        is_target[r - 1] = true;
    }
    let outside: Vec<usize> = (1..=n).filter(|&r| !is_target[r - 1]).collect();
    match start {
        StartLaw::Rank(r) => {
            spec.check_rank(r)?;
            if is_target[r - 1] {
                return Err(Error::StartInTarget(r));
            }
        }
        StartLaw::UniformOutsideTarget => {
            if outside.is_empty() {
                return Err(Error::Empty("complement of target_ranks"));
            }
        }
    }
    let slot: Vec<usize> = {
        let mut s = vec![usize::MAX; n];
        for (i, &r) in targets.iter().enumerate() {
            s[r - 1] = i;
        }
        s
    };
    let k = targets.len();
    let counts = crate::rng::fold_replicas(
        rng.master_seed,
        replicas,
        || vec![0u64; k],
        |acc, replica| {
            let mut r = replica.rng();
            let x0 = match start {
                StartLaw::Rank(x) => x,
                StartLaw::UniformOutsideTarget => outside[r.random_range(0..outside.len())],
            };
            let hit = spec.hit(x0, &is_target, &mut r);
            acc[slot[hit - 1]] += 1;
            Ok(())
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )?;
    Ok(HittingDistribution {
        targets,
        counts,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_gof;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_map_examples() {
        let m = build_rank_map(&[2.0, 5.0]).unwrap();
        assert_eq!(m.means, vec![5.0, 2.0]);
        assert_eq!(m.vertex_of_rank, vec![1, 0]);

        let m = build_rank_map(&[3.0; 4]).unwrap();
        assert_eq!(m.means, vec![3.0; 4]);
        assert_eq!(m.vertex_of_rank, vec![0, 1, 2, 3]);

        let m = build_rank_map(&[1.0, 4.0, 2.0, 8.0]).unwrap();
        assert_eq!(m.means, vec![8.0, 4.0, 2.0, 1.0]);
        assert_eq!(m.vertex_of_rank, vec![3, 1, 2, 0]);
        for r in 1..=4u32 {
            assert_eq!(m.rank_of_vertex[m.vertex_of_rank[r as usize - 1] as usize], r);
        }
    }

    #[test]
    fn rank_map_errors() {
        assert_eq!(build_rank_map(&[]), Err(Error::Empty("gamma_by_vertex")));
        assert!(matches!(
            build_rank_map(&[1.0, 0.0]),
            Err(Error::NonPositiveWeight { index: 1, .. })
        ));
        assert!(matches!(
            build_rank_map(&[1.0, f64::NAN]),
            Err(Error::NonPositiveWeight { index: 1, .. })
        ));
        assert!(matches!(
            TrapModelSpec::hypercube(&[1.0, 2.0, 3.0]),
            Err(Error::BadHypercubeSize { len: 3, .. })
        ));
        assert!(TrapModelSpec::hypercube(&[1.0]).is_err());
    }

    #[test]
    fn tiny_horizon_has_no_jumps() {
        let spec = TrapModelSpec::hypercube(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = simulate_trap_trajectory(&spec, 2, 1e-300, RngSpec::new(1, 0)).unwrap();
        assert_eq!(t.initial(), State::Site(2));
        assert!(t.jumps().is_empty());
    }

    #[test]
    fn single_state_complete_graph_is_constant() {
        let spec = TrapModelSpec::complete(&[0.3]).unwrap();
        for h in [0.1, 10.0, 1e4] {
            let t = simulate_trap_trajectory(&spec, 1, h, RngSpec::new(5, 0)).unwrap();
            assert!(t.jumps().is_empty());
            assert_eq!(t.value_at(h), State::Site(1));
        }
    }

    #[test]
    fn start_rank_checked() {
        let spec = TrapModelSpec::complete(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            simulate_trap_trajectory(&spec, 3, 1.0, RngSpec::new(0, 0)),
            Err(Error::RankOutOfRange { rank: 3, size: 2 })
        ));
        assert!(simulate_trap_trajectory(&spec, 0, 1.0, RngSpec::new(0, 0)).is_err());
    }

    #[test]
    fn first_holding_time_mean() {
        // d = 1, means (a, b) = (3, 1); start at rank 1.
        let spec = TrapModelSpec::hypercube(&[1.0, 3.0]).unwrap();
        let a = 3.0;
        let n = 100_000u64;
        let firsts = crate::rng::run_replicas(11, n, |s| {
            Ok(spec.sojourns(1, 1, &mut s.rng())?[0].duration)
        })
        .unwrap();
        let mean = firsts.iter().sum::<f64>() / n as f64;
        let se = a / (n as f64).sqrt();
        assert!((mean - a).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn hypercube_alternates_on_d1() {
        let spec = TrapModelSpec::hypercube(&[1.0, 2.0]).unwrap();
        let t = simulate_trap_trajectory(&spec, 1, 50.0, RngSpec::new(2, 0)).unwrap();
        for (k, j) in t.jumps().iter().enumerate() {
            assert_eq!(j.state, State::Site(if k % 2 == 0 { 2 } else { 1 }));
        }
    }

    #[test]
    fn state_at_matches_full_path() {
        let means: Vec<f64> = (0..256).map(|x| 0.9f64.powi(x)).collect();
        let spec = TrapModelSpec::hypercube_ranked(means, &mut RngSpec::new(1, 0).rng()).unwrap();
        for i in 0..50 {
            let s = RngSpec::new(4, i);
            let path = simulate_trap_trajectory(&spec, 3, 2.5, s).unwrap();
            let x = spec.state_at(3, 2.5, &mut s.rng()).unwrap();
            assert_eq!(path.value_at(2.5), State::Site(x));
        }
    }

    #[test]
    fn determinism() {
        let spec = TrapModelSpec::hypercube(&(1..=64).map(|x| x as f64).collect::<Vec<_>>()).unwrap();
        let a = simulate_trap_trajectory(&spec, 5, 100.0, RngSpec::new(3, 9)).unwrap();
        let b = simulate_trap_trajectory(&spec, 5, 100.0, RngSpec::new(3, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coordinate_flip_frequencies() {
        let d = 6u32;
        let spec = TrapModelSpec::hypercube(&vec![1.0; 1 << d]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let path = spec.simulate_vertices(VertexId(0), 20_000.0, &mut rng).unwrap();
        let mut counts = vec![0u64; d as usize];
        let mut prev = path.initial;
        for &(_, v) in &path.jumps {
            let diff = prev.0 ^ v.0;
            assert_eq!(diff.count_ones(), 1);
            counts[diff.trailing_zeros() as usize] += 1;
            prev = v;
        }
        let n: u64 = counts.iter().sum();
        let p = 1.0 / d as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() < 3.0 * se);
        }
    }

    #[test]
    fn single_target_has_frequency_one() {
        let spec = TrapModelSpec::hypercube(&(1..=16).map(|x| x as f64).collect::<Vec<_>>()).unwrap();
        let h = entrance_hitting_distribution(&spec, &[3], 7, 500, RngSpec::new(1, 0)).unwrap();
        assert_eq!(h.frequencies(), vec![1.0]);
    }

    #[test]
    fn start_inside_target_rejected() {
        let spec = TrapModelSpec::complete(&[1.0; 4]).unwrap();
        assert_eq!(
            entrance_hitting_distribution(&spec, &[1, 2], 2, 10, RngSpec::new(1, 0)),
            Err(Error::StartInTarget(2))
        );
    }

    /// Exact entrance law on Complete(4) by brute force: with uniform jumps
    /// (self included), enumerate all jump sequences of length <= L from
    /// a start outside J and accumulate the probability of each first hit.
    fn brute_force_complete_entrance(m: usize, targets: &[usize], start: usize, depth: usize) -> Vec<f64> {
        let mut mass = vec![0.0; targets.len()];
        let mut frontier = vec![(start, 1.0f64)];
        for _ in 0..depth {
            let mut next = Vec::new();
            for (_, p) in frontier {
                for y in 1..=m {
                    let q = p / m as f64;
                    match targets.iter().position(|&t| t == y) {
                        Some(i) => mass[i] += q,
                        None => next.push((y, q)),
                    }
                }
            }
            frontier = next;
        }
        mass
    }

    #[test]
    fn complete_graph_entrance_law_is_uniform() {
        let targets = [1, 3];
        let exact = brute_force_complete_entrance(4, &targets, 2, 20);
        let total: f64 = exact.iter().sum();
        for p in &exact {
            assert!((p / total - 0.5).abs() < 1e-12);
        }
        let spec = TrapModelSpec::complete(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        let h = entrance_hitting_distribution(&spec, &targets, 2, 20_000, RngSpec::new(8, 0)).unwrap();
        let gof = chi_square_gof(&h.counts, &[0.5, 0.5]).unwrap();
        assert!(gof.pvalue > 0.01, "{gof:?}");
    }
}
