//! Estimators and analytic targets: the arcsine aging function, two-time
//! correlations, one-time marginals, and the goodness-of-fit tests used to
//! compare them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::rng::{fold_replicas, run_replicas, RngSpec};
use crate::trajectory::{State, Trajectory};

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Anything that can produce a trajectory on `[0, horizon]` from a seed.
pub trait TrajectorySampler: Sync {
    fn sample(&self, rng: RngSpec, horizon: f64) -> Result<Trajectory>;
}

impl<F> TrajectorySampler for F
where
    F: Fn(RngSpec, f64) -> Result<Trajectory> + Sync,
{
    fn sample(&self, rng: RngSpec, horizon: f64) -> Result<Trajectory> {
        self(rng, horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub point: f64,
    /// Half-width of the 95% interval.
    pub half_width: f64,
    pub n: u64,
    pub master_seed: u64,
}

impl EstimateWithCI {
    /// Frequency estimate with a normal-approximation interval, switching to
    /// the Wilson half-width when the frequency is 0 or 1.
    pub fn proportion(successes: u64, n: u64, master_seed: u64) -> Self {
        assert!(n >= 1 && successes <= n);
        let nf = n as f64;
        let p = successes as f64 / nf;
        let half_width = if successes == 0 || successes == n {
            let z2 = Z_95 * Z_95;
            Z_95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf)
        } else {
            Z_95 * (p * (1.0 - p) / nf).sqrt()
        };
        EstimateWithCI {
            point: p,
            half_width,
            n,
            master_seed,
        }
    }

    /// Sample mean with a normal-approximation interval.
    pub fn mean(values: &[f64], master_seed: u64) -> Self {
        let n = values.len();
        assert!(n >= 1);
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        EstimateWithCI {
            point: mean,
            half_width: Z_95 * (var / nf).sqrt(),
            n: n as u64,
            master_seed,
        }
    }

    /// `|point - target|` in units of the half-width.
    pub fn z_distance(&self, target: f64) -> f64 {
        (self.point - target).abs() / self.half_width
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", alpha, "(0, 1)"))
    }
}

/// `∫_lo^hi s^{-α} (1-s)^{α-1} ds` with both endpoint singularities removed
/// by substitution: `u = s^{1-α}` on `[0, 1/2]` and `w = (1-s)^α` on
/// `[1/2, 1]`. The upper end is passed as `1 - hi` and `1 - lo` to keep
/// precision near `s = 1`.
fn beta_kernel_integral(alpha: f64, lo: f64, one_minus_lo: f64, hi: f64, one_minus_hi: f64) -> f64 {
    const TOL: f64 = 1e-14;
    let mut total = 0.0;
    let mid = 0.5;
    if lo < mid {
        let top = hi.min(mid);
        let p = 1.0 / (1.0 - alpha);
        let f = |u: f64| (1.0 - u.powf(p)).powf(alpha - 1.0);
        let (v, _) = integrate(f, lo.powf(1.0 - alpha), top.powf(1.0 - alpha), TOL);
        total += v * p;
    }
    if hi > mid {
        // s in [max(lo, 1/2), hi]  <=>  w in [(1-hi)^α, (1-max(lo,1/2))^α]
        let q = 1.0 / alpha;
        let f = |w: f64| (1.0 - w.powf(q)).powf(-alpha);
        let w_hi = if lo > mid { one_minus_lo } else { mid }.powf(alpha);
        let w_lo = one_minus_hi.powf(alpha);
        let (v, _) = integrate(f, w_lo, w_hi, TOL);
        total += v * q;
    }
    total
}

/// The arcsine aging function
/// `R(x) = sin(πα)/π ∫_{x/(1+x)}^1 s^{-α}(1-s)^{α-1} ds`.
pub fn arcsine_r(alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(x >= 0.0) {
        return Err(Error::param("x", x, "[0, inf)"));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let a = x / (1.0 + x);
    let one_minus_a = 1.0 / (1.0 + x);
    let c = (PI * alpha).sin() / PI;
    Ok(c * beta_kernel_integral(alpha, a, one_minus_a, 1.0, 0.0))
}

/// `sin(πα)/π ∫_0^{x/(1+x)} s^{-α}(1-s)^{α-1} ds`, so that
/// `arcsine_r + arcsine_complement = 1`.
pub fn arcsine_complement(alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(x >= 0.0) {
        return Err(Error::param("x", x, "[0, inf)"));
    }
    let (a, one_minus_a) = if x.is_infinite() {
        (1.0, 0.0)
    } else {
        (x / (1.0 + x), 1.0 / (1.0 + x))
    };
    let c = (PI * alpha).sin() / PI;
    Ok(c * beta_kernel_integral(alpha, 0.0, 1.0, a, one_minus_a))
}

/// Frequency of `{Y_t = Y_{t+s}}` across replicas.
pub fn estimate_two_time<S: TrajectorySampler + ?Sized>(
    sampler: &S,
    t: f64,
    s: f64,
    replicas: u64,
    master_seed: u64,
) -> Result<EstimateWithCI> {
    if replicas == 0 {
        return Err(Error::param("replicas", 0.0, "[1, inf)"));
    }
    if !(t > 0.0 && s >= 0.0) {
        return Err(Error::param("t, s", t.min(s), "t > 0, s >= 0"));
    }
    let hits = fold_replicas(
        master_seed,
        replicas,
        || 0u64,
        |acc, rng| {
            let traj = sampler.sample(rng, t + s)?;
            if traj.value_at(t) == traj.value_at(t + s) {
                *acc += 1;
            }
            Ok(())
        },
        |a, b| a + b,
    )?;
    Ok(EstimateWithCI::proportion(hits, replicas, master_seed))
}

/// Per-replica indicators of `{Y_t = Y_{t+s}}`, in replica order.
pub fn two_time_indicators<S: TrajectorySampler + ?Sized>(
    sampler: &S,
    t: f64,
    s: f64,
    replicas: u64,
    master_seed: u64,
) -> Result<Vec<bool>> {
    run_replicas(master_seed, replicas, |rng| {
        let traj = sampler.sample(rng, t + s)?;
        Ok(traj.value_at(t) == traj.value_at(t + s))
    })
}

/// Bucket of a one-time marginal; states above the display cap (and `∞`)
/// share `Overflow`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bucket {
    Site(usize),
    Overflow,
}

impl Bucket {
    pub fn of(state: State, cap: usize) -> Bucket {
        match state {
            State::Site(x) if x <= cap => Bucket::Site(x),
            _ => Bucket::Overflow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub counts: BTreeMap<Bucket, u64>,
    pub total: u64,
}

impl EmpiricalDistribution {
    pub fn from_counts(counts: impl IntoIterator<Item = (Bucket, u64)>) -> Self {
        let mut d = EmpiricalDistribution::default();
        for (b, c) in counts {
            if c > 0 {
                *d.counts.entry(b).or_insert(0) += c;
                d.total += c;
            }
        }
        d
    }

    pub fn add(&mut self, b: Bucket) {
        *self.counts.entry(b).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (b, c) in other.counts {
            *self.counts.entry(b).or_insert(0) += c;
        }
        self.total += other.total;
        self
    }

    pub fn count(&self, b: Bucket) -> u64 {
        self.counts.get(&b).copied().unwrap_or(0)
    }

    pub fn frequency(&self, b: Bucket) -> f64 {
        self.count(b) as f64 / self.total as f64
    }
}

/// Distribution of the state at time `t` over `replicas` trajectories.
pub fn marginal_distribution<S: TrajectorySampler + ?Sized>(
    sampler: &S,
    t: f64,
    replicas: u64,
    master_seed: u64,
    display_cap: usize,
) -> Result<EmpiricalDistribution> {
    if replicas == 0 {
        return Err(Error::param("replicas", 0.0, "[1, inf)"));
    }
    let horizon = if t > 0.0 { t } else { f64::MIN_POSITIVE };
    fold_replicas(
        master_seed,
        replicas,
        EmpiricalDistribution::default,
        |acc, rng| {
            let traj = sampler.sample(rng, horizon)?;
            acc.add(Bucket::of(traj.value_at(t), display_cap));
            Ok(())
        },
        EmpiricalDistribution::merge,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub tv_distance: f64,
    pub chi2_stat: f64,
    pub dof: usize,
    pub pvalue: f64,
    /// Fewer than two cells after pooling; the chi-square part is void
    /// (`chi2_stat = 0`, `pvalue = 1`).
    pub degenerate: bool,
}

/// Merges cells whose weight is below `min` into their neighbours, keeping
/// the cell order. Returns the groups as index lists.
fn pool_cells(weights: &[f64], min: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut pending_w = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        pending.push(i);
        pending_w += w;
        if pending_w >= min {
            groups.push(std::mem::take(&mut pending));
            pending_w = 0.0;
        }
    }
    if !pending.is_empty() {
        match groups.last_mut() {
            Some(last) => last.extend(pending),
            None => groups.push(pending),
        }
    }
    groups
}

/// Total variation distance and the two-sample chi-square test, pooling
/// cells with fewer than 5 expected counts on either side.
pub fn compare_distributions(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<Comparison> {
    if p.total == 0 || q.total == 0 {
        return Err(Error::Empty("empirical distribution"));
    }
    let keys: Vec<Bucket> = p
        .counts
        .keys()
        .chain(q.counts.keys())
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let (np, nq) = (p.total as f64, q.total as f64);
    let a: Vec<f64> = keys.iter().map(|&k| p.count(k) as f64).collect();
    let b: Vec<f64> = keys.iter().map(|&k| q.count(k) as f64).collect();
    // Cross-multiplied counts are exact integers, so disjoint supports give 1.
    let tv = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x * nq - y * np).abs())
        .sum::<f64>()
        / (2.0 * np * nq);

    // Smaller of the two expected counts per cell under the pooled law.
    let expected_min: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x + y) * np.min(nq) / (np + nq))
        .collect();
    let groups = pool_cells(&expected_min, 5.0);
    if groups.len() < 2 {
        return Ok(Comparison {
            tv_distance: tv,
            chi2_stat: 0.0,
            dof: 0,
            pvalue: 1.0,
            degenerate: true,
        });
    }
    let (ra, rb) = ((nq / np).sqrt(), (np / nq).sqrt());
    let chi2: f64 = groups
        .iter()
        .map(|g| {
            let x: f64 = g.iter().map(|&i| a[i]).sum();
            let y: f64 = g.iter().map(|&i| b[i]).sum();
            (x * ra - y * rb).powi(2) / (x + y)
        })
        .sum();
    let dof = groups.len() - 1;
    Ok(Comparison {
        tv_distance: tv,
        chi2_stat: chi2,
        dof,
        pvalue: chi2_sf(chi2, dof),
        degenerate: false,
    })
}

fn chi2_sf(x: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("dof >= 1")
        .sf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub pvalue: f64,
}

/// Pearson goodness-of-fit of `counts` against cell probabilities `probs`,
/// pooling cells with fewer than 5 expected counts.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(Error::Empty("chi-square cells"));
    }
    let n: u64 = counts.iter().sum();
    let psum: f64 = probs.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p / psum * n as f64).collect();
    let groups = pool_cells(&expected, 5.0);
    if groups.len() < 2 {
        return Err(Error::Empty("cells after pooling"));
    }
    let statistic: f64 = groups
        .iter()
        .map(|g| {
            let o: f64 = g.iter().map(|&i| counts[i] as f64).sum();
            let e: f64 = g.iter().map(|&i| expected[i]).sum();
            (o - e).powi(2) / e
        })
        .sum();
    let dof = groups.len() - 1;
    Ok(ChiSquareTest {
        statistic,
        dof,
        pvalue: chi2_sf(statistic, dof),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub pvalue: f64,
}

/// Asymptotic Kolmogorov tail with Stephens' small-sample correction.
fn kolmogorov_pvalue(d: f64, effective_n: f64) -> f64 {
    let en = effective_n.sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsTest {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    KsTest {
        statistic: d,
        pvalue: kolmogorov_pvalue(d, n),
    }
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    KsTest {
        statistic: d,
        pvalue: kolmogorov_pvalue(d, n * m / (n + m)),
    }
}

/// Fraction of `[0, horizon]` spent at each of the states `1..=m`.
pub fn occupation_fractions(traj: &Trajectory, m: usize) -> Vec<f64> {
    let mut occ = vec![0.0; m];
    for seg in traj.segments() {
        if let State::Site(x) = seg.state {
            if x <= m {
                occ[x - 1] += seg.end - seg.start;
            }
        }
    }
    let h = traj.horizon();
    occ.iter_mut().for_each(|o| *o /= h);
    occ
}

/// `Σ_x γ̄_x²` for `γ̄` the normalized weights: the chance that two
/// independent equilibrium draws coincide.
pub fn equilibrium_overlap(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    weights.iter().map(|w| (w / s).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgingCurve {
    pub alpha: f64,
    pub t: f64,
    pub theta_values: Vec<f64>,
    pub estimates: Vec<EstimateWithCI>,
    /// Time unit: trajectories are read at `scale·t` and `scale·(t + θt)`.
    pub scale: f64,
}

#[derive(Debug, Serialize)]
struct AgingRow {
    theta: f64,
    estimate: f64,
    ci_half_width: f64,
    n: u64,
    #[serde(rename = "theory_R")]
    theory_r: f64,
}

impl AgingCurve {
    pub fn theory(&self) -> Result<Vec<f64>> {
        self.theta_values
            .iter()
            .map(|&th| arcsine_r(self.alpha, th))
            .collect()
    }

    /// CSV `theta,estimate,ci_half_width,n,theory_R`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for ((&theta, e), r) in self.theta_values.iter().zip(&self.estimates).zip(self.theory()?) {
            w.serialize(AgingRow {
                theta,
                estimate: e.point,
                ci_half_width: e.half_width,
                n: e.n,
                theory_r: r,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Two-time correlations at `θ = s/t` for each value of `thetas`.
pub fn aging_curve<S: TrajectorySampler + ?Sized>(
    sampler: &S,
    alpha: f64,
    t: f64,
    thetas: &[f64],
    scale: f64,
    replicas: u64,
    master_seed: u64,
) -> Result<AgingCurve> {
    check_alpha(alpha)?;
    if thetas.windows(2).any(|w| w[1] <= w[0]) || thetas.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::param("theta", f64::NAN, "strictly increasing positive grid"));
    }
    let estimates = thetas
        .iter()
        .map(|&theta| estimate_two_time(sampler, scale * t, scale * theta * t, replicas, master_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(AgingCurve {
        alpha,
        t,
        theta_values: thetas.to_vec(),
        estimates,
        scale,
    })
}
