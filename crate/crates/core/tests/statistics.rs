use rand::Rng;
use trapk::disorder::{AnnealedHypercube, DisorderKind, DisorderSpec};
use trapk::experiment::k_marginal;
use trapk::kprocess::{clock_events, sample_k_process, sample_stable_gamma};
use trapk::rng::{run_replicas, Domain};
use trapk::stats::{
    aging_curve, chi_square_gof, equilibrium_overlap, estimate_two_time, ks_one_sample, occupation_fractions,
    two_time_indicators, Bucket, EstimateWithCI,
};
use trapk::{GammaMeasure, Result, RngSpec, State, Trajectory, TrapModelSpec};

fn exp_cdf(mean: f64) -> impl Fn(f64) -> f64 {
    move |t| 1.0 - (-t.max(0.0) / mean).exp()
}

/// Per-coordinate mean and standard error of replica vectors.
fn mean_and_se(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = rows.len() as f64;
    (0..rows[0].len())
        .map(|i| {
            let mean = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        })
        .collect()
}

#[test]
fn hypercube_holding_times_are_exponential() {
    let means: Vec<f64> = (1..=16).map(|x| 1.0 / x as f64).collect();
    let spec = TrapModelSpec::hypercube(&means).unwrap();
    for rank in [1, 5, 16] {
        let samples = run_replicas(1, 20_000, |rng| Ok(spec.sojourns(rank, 1, &mut rng.rng())?[0].duration)).unwrap();
        let ks = ks_one_sample(&samples, exp_cdf(spec.mean_of_rank(rank)));
        assert!(ks.pvalue > 0.01, "rank {rank}: p = {}", ks.pvalue);
    }
}

#[test]
fn start_at_infinity_enters_uniformly() {
    let gamma = GammaMeasure::new(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
    let firsts = run_replicas(2, 50_000, |rng| {
        let (held, ev) = clock_events(&gamma, 5, State::Infinity, 1, &mut rng.rng())?;
        assert_eq!(held, 0.0);
        Ok(ev[0].site)
    })
    .unwrap();
    let mut counts = vec![0u64; 5];
    firsts.iter().for_each(|&s| counts[s - 1] += 1);
    assert!(chi_square_gof(&counts, &[0.2; 5]).unwrap().pvalue > 0.01);
}

#[test]
fn deepest_stable_weight_has_exponential_law() {
    let alpha = 0.5;
    let samples = run_replicas(3, 100_000, |rng| {
        let g = sample_stable_gamma(alpha, 4, &mut rng.rng())?;
        Ok(g.weights()[0].powf(-alpha))
    })
    .unwrap();
    let ks = ks_one_sample(&samples, exp_cdf(1.0));
    assert!(ks.pvalue > 0.01, "p = {}", ks.pvalue);
}

#[test]
fn occupation_converges_to_normalized_weights() {
    let gamma = GammaMeasure::new(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
    let horizon = 2_000.0 * 15.0;
    let rows = run_replicas(4, 200, |rng| {
        let s = sample_k_process(&gamma, 5, State::Site(1), horizon, &mut rng.rng())?;
        Ok(occupation_fractions(&s.trajectory, 5))
    })
    .unwrap();
    for (x, (mean, se)) in mean_and_se(&rows).into_iter().enumerate() {
        let target = gamma.weights()[x] / 15.0;
        assert!((mean - target).abs() <= 3.0 * se, "site {}: {mean} vs {target} (se {se})", x + 1);
    }
}

#[test]
fn restriction_matches_lower_truncation() {
    let gamma = GammaMeasure::geometric(0.7, 12).unwrap();
    let (m, big) = (4, 10);
    let horizon = 200.0;
    let low = run_replicas(5, 400, |rng| {
        let s = sample_k_process(&gamma, m, State::Site(1), horizon, &mut rng.rng())?;
        Ok(occupation_fractions(&s.trajectory, m))
    })
    .unwrap();
    let high = run_replicas(6, 400, |rng| {
        let s = sample_k_process(&gamma, big, State::Site(1), horizon, &mut rng.rng())?;
        Ok(occupation_fractions(&s.trajectory.restrict(m), m))
    })
    .unwrap();
    for (x, (a, b)) in mean_and_se(&low).into_iter().zip(mean_and_se(&high)).enumerate() {
        let se = (a.1 * a.1 + b.1 * b.1).sqrt();
        assert!((a.0 - b.0).abs() <= 3.0 * se, "site {}: {} vs {} (se {se})", x + 1, a.0, b.0);
    }
}

#[test]
fn rescaling_time_and_weights_preserves_indicators() {
    let gamma = GammaMeasure::geometric(0.6, 20).unwrap();
    let c = 4.0;
    let scaled = gamma.scaled(c).unwrap();
    let base = |rng: RngSpec, h: f64| -> Result<Trajectory> {
        Ok(sample_k_process(&gamma, 20, State::Site(3), h, &mut rng.rng())?.trajectory)
    };
    let stretched = |rng: RngSpec, h: f64| -> Result<Trajectory> {
        Ok(sample_k_process(&scaled, 20, State::Site(3), h, &mut rng.rng())?.trajectory)
    };
    for (t, s) in [(0.3, 0.2), (1.0, 1.0), (2.0, 5.0)] {
        let a = two_time_indicators(&base, t, s, 5_000, 7).unwrap();
        let b = two_time_indicators(&stretched, c * t, c * s, 5_000, 7).unwrap();
        assert_eq!(a, b, "t {t} s {s}");
    }
}

#[test]
fn zero_lag_correlation_is_one() {
    let gamma = GammaMeasure::geometric(0.5, 10).unwrap();
    let sampler = |rng: RngSpec, h: f64| -> Result<Trajectory> {
        Ok(sample_k_process(&gamma, 10, State::Infinity, h, &mut rng.rng())?.trajectory)
    };
    let e = estimate_two_time(&sampler, 1.0, 0.0, 1_000, 8).unwrap();
    assert_eq!(e.point, 1.0);
}

#[test]
fn long_lag_correlation_reaches_equilibrium_overlap() {
    let weights = vec![5.0, 4.0, 3.0, 2.0, 1.0];
    let gamma = GammaMeasure::new(weights.clone()).unwrap();
    let sampler = |rng: RngSpec, h: f64| -> Result<Trajectory> {
        Ok(sample_k_process(&gamma, 5, State::Site(1), h, &mut rng.rng())?.trajectory)
    };
    let e = estimate_two_time(&sampler, 1_500.0, 1_500.0, 40_000, 9).unwrap();
    let overlap = equilibrium_overlap(&weights);
    assert!(e.z_distance(overlap) <= 3.0, "{} +- {} vs {overlap}", e.point, e.half_width);
}

#[test]
fn marginal_at_time_zero_is_the_start() {
    let gamma = GammaMeasure::geometric(0.5, 10).unwrap();
    let dist = k_marginal(&gamma, 10, State::Site(3), 1e-300, 2_000, 10, 20).unwrap();
    assert_eq!(dist.count(Bucket::Site(3)), 2_000);
}

#[test]
fn complete_graph_equilibrates() {
    let spec = TrapModelSpec::complete(&[2.0, 1.0, 1.0]).unwrap();
    let xs = run_replicas(11, 30_000, |rng| spec.state_at(3, 400.0, &mut rng.rng())).unwrap();
    let mut counts = vec![0u64; 3];
    xs.iter().for_each(|&x| counts[x - 1] += 1);
    assert!(chi_square_gof(&counts, &[0.5, 0.25, 0.25]).unwrap().pvalue > 0.01);
}

#[test]
fn short_scale_aging_follows_arcsine_law() {
    let alpha = 0.5;
    let d = 14;
    let disorder = DisorderSpec {
        kind: DisorderKind::RemLikePareto { alpha },
        d,
    };
    let c_d = disorder.c_d();
    let model = AnnealedHypercube::new(disorder, c_d).unwrap();
    let sampler = |rng: RngSpec, h: f64| model.simulate(h, rng);
    let scale = (-(d as f64) / (2.0 * alpha)).exp2();
    let curve = aging_curve(&sampler, alpha, 1.0, &[0.5, 1.0, 2.0], scale, 10_000, 12).unwrap();
    for ((e, r), th) in curve.estimates.iter().zip(curve.theory().unwrap()).zip(&curve.theta_values) {
        assert!(e.z_distance(r) <= 3.0, "theta {th}: {} +- {} vs {r}", e.point, e.half_width);
    }

    // Equilibrium overlap of the ergodic-scale environment, averaged over
    // independent environments.
    let overlaps = run_replicas(13, 200, |rng| {
        let raw = disorder.draw(&mut rng.rng_for(Domain::Disorder))?;
        Ok(equilibrium_overlap(&raw))
    })
    .unwrap();
    let overlap = EstimateWithCI::mean(&overlaps, 13);
    let at_one = &curve.estimates[1];
    assert!(
        at_one.point > overlap.point,
        "short-scale curve {} +- {} vs equilibrium overlap {} +- {}",
        at_one.point,
        at_one.half_width,
        overlap.point,
        overlap.half_width
    );
}

#[test]
fn annealed_start_is_uniform_over_the_cube() {
    let disorder = DisorderSpec {
        kind: DisorderKind::RemLikePareto { alpha: 0.5 },
        d: 3,
    };
    let model = AnnealedHypercube::new(disorder, 1.0).unwrap();
    let starts = run_replicas(14, 16_000, |rng| {
        let _ = rng.rng().random::<u8>();
        Ok(model.simulate(1.0, rng)?.initial().site().unwrap())
    })
    .unwrap();
    let mut counts = vec![0u64; 8];
    starts.iter().for_each(|&v| counts[v - 1] += 1);
    assert!(chi_square_gof(&counts, &[0.125; 8]).unwrap().pvalue > 0.01);
}
