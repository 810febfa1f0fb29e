//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.
//!
//!     cargo test -p trapk-acceptance --test acceptance

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use trapk::disorder::{pareto_c_d, pareto_threshold, DisorderKind, DisorderSpec};
use trapk::experiment::{hypercube_marginal, k_marginal};
use trapk::kprocess::{choose_truncation, clock_events, sample_k_process, sample_stable_gamma_seeded};
use trapk::rng::{fold_replicas, run_replicas, Domain};
use trapk::skorohod::{
    build_time_distortion, distortion_bound, phi, rho_given_lambda, rho_upper_bound, time_changed,
    EntranceExitTimes, TimeDistortion, Visit,
};
use trapk::stats::{
    aging_curve, arcsine_complement, arcsine_r, chi_square_gof, compare_distributions, ks_one_sample, Bucket,
    EmpiricalDistribution,
};
use trapk::trapmodel::{entrance_hitting_distribution, StartLaw};
use trapk::{GammaMeasure, Result, RngSpec, State, Trajectory, TrapModelSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn entrance_law() -> Result<Outcome> {
    let j = 5;
    let targets: Vec<usize> = (1..=j).collect();
    let uniform = vec![1.0 / j as f64; j];
    let mut mean_dev = Vec::new();
    let mut pvalues_d12 = Vec::new();
    for d in [8u32, 10, 12] {
        let mut devs = Vec::new();
        for seed in 1..=3u64 {
            let env = DisorderSpec {
                kind: DisorderKind::RemLikePareto { alpha: 0.5 },
                d,
            }
            .sample(RngSpec::new(seed, d as u64))?;
            let hits = entrance_hitting_distribution(
                &env.trap_model(),
                &targets,
                StartLaw::UniformOutsideTarget,
                100_000,
                RngSpec::new(seed, 0),
            )?;
            devs.push(hits.max_deviation_from_uniform());
            if d == 12 {
                pvalues_d12.push(chi_square_gof(&hits.counts, &uniform)?.pvalue);
            }
        }
        mean_dev.push(devs.iter().sum::<f64>() / devs.len() as f64);
    }
    let monotone = mean_dev.windows(2).all(|w| w[1] < w[0]);
    let uniform_ok = pvalues_d12.iter().all(|&p| p > 0.01);
    outcome(
        monotone && uniform_ok,
        format!(
            "mean max deviation over 3 seeds at d=8,10,12: {:.5} {:.5} {:.5}; chi-square p at d=12: {:.3} {:.3} {:.3}",
            mean_dev[0], mean_dev[1], mean_dev[2], pvalues_d12[0], pvalues_d12[1], pvalues_d12[2]
        ),
    )
}

fn truncation_oracle() -> Result<Outcome> {
    let gamma = GammaMeasure::new(vec![4.0, 2.0, 1.0])?;
    let m = 3;
    let spec = TrapModelSpec::complete(gamma.weights())?;
    let n = 100_000u64;
    let steps = 4;
    let code = |sites: &[usize]| sites.iter().fold(0, |acc, &s| acc * m + (s - 1));

    // Per replica: the 4-site sequence and the 4 (site, duration) pairs.
    type Draw = (usize, Vec<(usize, f64)>);
    let k_draws: Vec<Draw> = run_replicas(21, n, |rng| {
        let y0 = rng.rng_for(Domain::Start).random_range(1..=m);
        let (t0, events) = clock_events(&gamma, m, State::Site(y0), steps - 1, &mut rng.rng())?;
        let mut pairs = vec![(y0, t0)];
        pairs.extend(events.iter().map(|e| (e.site, e.duration)));
        let sites: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        Ok((code(&sites), pairs))
    })?;
    let c_draws: Vec<Draw> = run_replicas(22, n, |rng| {
        let y0 = rng.rng_for(Domain::Start).random_range(1..=m);
        let soj = spec.sojourns(y0, steps, &mut rng.rng())?;
        let pairs: Vec<(usize, f64)> = soj.iter().map(|s| (s.rank, s.duration)).collect();
        let sites: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        Ok((code(&sites), pairs))
    })?;

    let cells = m.pow(steps as u32);
    let count = |draws: &[Draw]| {
        let mut c = vec![0u64; cells];
        draws.iter().for_each(|d| c[d.0] += 1);
        c
    };
    let (kc, cc) = (count(&k_draws), count(&c_draws));
    let exact = vec![1.0 / cells as f64; cells];
    let p_k = chi_square_gof(&kc, &exact)?.pvalue;
    let p_c = chi_square_gof(&cc, &exact)?.pvalue;
    let as_dist = |c: &[u64]| EmpiricalDistribution::from_counts(c.iter().enumerate().map(|(i, &x)| (Bucket::Site(i + 1), x)));
    let p_two = compare_distributions(&as_dist(&kc), &as_dist(&cc))?.pvalue;

    let mut ks_p = Vec::new();
    for x in 1..=m {
        let mean = gamma.weights()[x - 1];
        for draws in [&k_draws, &c_draws] {
            let durations: Vec<f64> = draws
                .iter()
                .flat_map(|d| d.1.iter().filter(|p| p.0 == x).map(|p| p.1))
                .collect();
            ks_p.push(ks_one_sample(&durations, |t| 1.0 - (-t.max(0.0) / mean).exp()).pvalue);
        }
    }
    let min_ks = ks_p.iter().copied().fold(1.0, f64::min);
    outcome(
        p_k > 0.01 && p_c > 0.01 && p_two > 0.01 && min_ks > 0.01,
        format!(
            "4-step sequences vs exact law p = {p_k:.3} (K) {p_c:.3} (complete), two-sample p = {p_two:.3}; smallest of 6 holding-time KS p = {min_ks:.3}"
        ),
    )
}

fn convergence() -> Result<Outcome> {
    let gamma = GammaMeasure::geometric(0.5, 64)?;
    let m = choose_truncation(&gamma, 1e-4)?;
    let n = 100_000;
    let cap = 20;
    let k = k_marginal(&gamma, m, State::Site(1), 1.0, n, 31, cap)?;
    let mut tv = Vec::new();
    for d in [10u32, 12, 14] {
        let means: Vec<f64> = (1..=1usize << d)
            .map(|x| 0.5f64.powf(x as f64).max(f64::MIN_POSITIVE))
            .collect();
        let spec = TrapModelSpec::hypercube_ranked(means, &mut RngSpec::new(30, d as u64).rng_for(Domain::Placement))?;
        let h = hypercube_marginal(&spec, 1, 1.0, n, 32 + d as u64, cap)?;
        tv.push(compare_distributions(&h, &k)?.tv_distance);
    }
    let monotone = tv.windows(2).all(|w| w[1] < w[0]);
    outcome(
        monotone && tv[2] < 0.05,
        format!("M = {m}; TV at t=1 for d=10,12,14: {:.4} {:.4} {:.4}", tv[0], tv[1], tv[2]),
    )
}

fn arcsine() -> Result<Outcome> {
    let mut worst_zero: f64 = 0.0;
    let mut worst_complement: f64 = 0.0;
    for alpha in [0.3, 0.5, 0.8] {
        worst_zero = worst_zero.max((arcsine_r(alpha, 0.0)? - 1.0).abs());
        for x in [1e-6, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 30.0, 1e3, 1e6] {
            let sum = arcsine_r(alpha, x)? + arcsine_complement(alpha, x)?;
            worst_complement = worst_complement.max((sum - 1.0).abs());
        }
    }
    let closed = 1.0 - 2.0 / PI * 0.5f64.sqrt().asin();
    let half = (arcsine_r(0.5, 1.0)? - 0.5).abs().max((arcsine_r(0.5, 1.0)? - closed).abs());
    outcome(
        worst_zero <= 1e-9 && worst_complement <= 1e-9 && half <= 1e-9,
        format!("|R(a,0)-1| <= {worst_zero:.1e}, complement identity error <= {worst_complement:.1e}, |R(0.5,1)-0.5| = {half:.1e}"),
    )
}

fn k_aging() -> Result<Outcome> {
    let alpha = 0.5;
    let m = 1000;
    let gamma = sample_stable_gamma_seeded(alpha, m, RngSpec::new(0, 0))?;
    let sampler = |rng: RngSpec, horizon: f64| -> Result<Trajectory> {
        let y0 = rng.rng_for(Domain::Start).random_range(1..=m);
        Ok(sample_k_process(&gamma, m, State::Site(y0), horizon, &mut rng.rng())?.trajectory)
    };
    let curve = aging_curve(&sampler, alpha, 1.0, &[0.5, 1.0, 2.0], 1e-3, 100_000, 50)?;
    let theory = curve.theory()?;
    let z: Vec<f64> = curve.estimates.iter().zip(&theory).map(|(e, &r)| e.z_distance(r)).collect();
    let parts: Vec<String> = curve
        .theta_values
        .iter()
        .zip(&curve.estimates)
        .zip(&theory)
        .zip(&z)
        .map(|(((th, e), r), z)| format!("theta {th}: {:.4} +- {:.4} vs R {r:.4} ({z:.1} hw)", e.point, e.half_width))
        .collect();
    outcome(z.iter().all(|&z| z <= 3.0), parts.join("; "))
}

fn rem_extremes() -> Result<Outcome> {
    let alpha = 0.5;
    let d = 16;
    let spec = DisorderSpec {
        kind: DisorderKind::RemLikePareto { alpha },
        d,
    };
    let c_d = spec.c_d();
    let exact = c_d == (-32f64).exp2() && c_d == pareto_c_d(alpha, d) && c_d * pareto_threshold(alpha, d) == 1.0;
    let samples = run_replicas(60, 10_000, |rng| {
        let raw = spec.draw(&mut rng.rng_for(Domain::Disorder))?;
        let top = raw.into_iter().fold(0.0, f64::max);
        Ok((c_d * top).powf(-alpha))
    })?;
    let ks = ks_one_sample(&samples, |y| 1.0 - (-y.max(0.0)).exp());
    outcome(
        exact && ks.pvalue > 0.01,
        format!("c_d = {c_d:e} exact: {exact}; KS of (tau_1)^-alpha vs Exp(1): D = {:.4}, p = {:.3}", ks.statistic, ks.pvalue),
    )
}

/// Matched entrance/exit sequences with small integer times, including
/// zero-length intervals on both sides.
fn random_matched<R: Rng>(rng: &mut R) -> (EntranceExitTimes, EntranceExitTimes) {
    let visits = rng.random_range(0..5);
    let (mut s, mut t) = (0.0, 0.0);
    let mut step = |rng: &mut R| {
        let a = rng.random_range(0..4) as f64;
        let b = if a == 0.0 { 0.0 } else { rng.random_range(1..6) as f64 };
        s += a;
        t += b;
        (s, t)
    };
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for _ in 0..visits {
        let (s0, t0) = step(rng);
        let (s1, t1) = step(rng);
        src.push(Visit { entry: s0, exit: s1, exit_censored: false });
        dst.push(Visit { entry: t0, exit: t1, exit_censored: false });
    }
    let (sn, tn) = step(rng);
    let (sn, tn) = if rng.random_bool(0.2) { (f64::INFINITY, f64::INFINITY) } else { (sn, tn) };
    (
        EntranceExitTimes { visits: src, next_entry: sn },
        EntranceExitTimes { visits: dst, next_entry: tn },
    )
}

fn random_path<R: Rng>(rng: &mut R, horizon: f64, max_jumps: usize) -> Trajectory {
    let pick = |rng: &mut R| if rng.random_bool(0.15) { State::Infinity } else { State::Site(rng.random_range(1..=6)) };
    let k = rng.random_range(0..=max_jumps);
    let mut times: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * horizon).filter(|&t| t > 0.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut b = trapk::trajectory::TrajectoryBuilder::new(pick(rng));
    for t in times {
        b.push(t, pick(rng));
    }
    b.finish(horizon)
}

fn random_distortion<R: Rng>(rng: &mut R, horizon: f64) -> Result<TimeDistortion> {
    let mut knots = vec![(0.0, 0.0)];
    let (mut t, mut v) = (0.0, 0.0);
    for _ in 0..rng.random_range(0..4) {
        t += rng.random::<f64>() * horizon / 3.0 + 1e-3;
        v += (t - knots.last().unwrap().0) * rng.random_range(0.5..2.0);
        knots.push((t, v));
    }
    TimeDistortion::new(knots, rng.random_range(0.5..2.0))
}

fn skorohod() -> Result<Outcome> {
    let mut rng = RngSpec::new(70, 0).rng();
    let identity_zero = phi(&TimeDistortion::identity()) == 0.0;

    let mut equal = 0;
    for _ in 0..20 {
        let (a, b) = random_matched(&mut rng);
        if phi(&build_time_distortion(&a, &b)?) == distortion_bound(&a, &b)? {
            equal += 1;
        }
    }

    let mut max_integral: f64 = 0.0;
    for _ in 0..1000 {
        let f = random_path(&mut rng, 6.0, 8);
        let g = random_path(&mut rng, 6.0, 8);
        let l = random_distortion(&mut rng, 6.0)?;
        max_integral = max_integral.max(rho_given_lambda(&f, &g, &l)?);
    }

    let pairs = 200;
    let mut within = 0;
    let mut worst_excess: f64 = 0.0;
    for _ in 0..pairs {
        let f = random_path(&mut rng, 5.0, 4);
        let l = random_distortion(&mut rng, 5.0)?;
        let g = time_changed(&f, &l);
        let bound = rho_upper_bound(&f, &g, std::slice::from_ref(&l))?.value;
        if bound <= phi(&l) {
            within += 1;
        } else {
            worst_excess = worst_excess.max(bound - phi(&l));
        }
    }
    outcome(
        identity_zero && equal == 20 && max_integral <= 1.0 && within == pairs,
        format!(
            "phi(identity) = 0: {identity_zero}; distortion bound equality on {equal}/20; max integral over 1000 pairs {max_integral:.4}; bound <= phi on {within}/{pairs} time-changed pairs (worst excess {worst_excess:.4})"
        ),
    )
}

fn equilibrium() -> Result<Outcome> {
    let gamma = [5.0, 4.0, 3.0, 2.0, 1.0];
    let spec = TrapModelSpec::complete(&gamma)?;
    let total: f64 = gamma.iter().sum();
    let t = 100.0 * total;
    let counts = fold_replicas(
        80,
        100_000,
        || vec![0u64; 5],
        |acc, rng| {
            acc[spec.state_at(1, t, &mut rng.rng())? - 1] += 1;
            Ok(())
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )?;
    let probs: Vec<f64> = spec.means().iter().map(|g| g / total).collect();
    let test = chi_square_gof(&counts, &probs)?;
    outcome(test.pvalue > 0.01, format!("t = {t}; chi-square vs gamma_bar: stat {:.2}, p = {:.3}", test.statistic, test.pvalue))
}

type Check = fn() -> Result<Outcome>;

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("entrance law is uniform on the deepest traps", entrance_law),
        ("truncated K process matches the complete graph", truncation_oracle),
        ("hypercube marginals approach the K process", convergence),
        ("arcsine law quadrature", arcsine),
        ("K process aging at a small time scale", k_aging),
        ("REM-like extremes and c_d", rem_extremes),
        ("Skorohod machinery", skorohod),
        ("complete graph equilibrium", equilibrium),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (status, detail) = match check() {
            Ok(o) => (if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {} {status}: {name} ({:.1}s) {detail}",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
