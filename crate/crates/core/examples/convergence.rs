//! Hypercube trap model with means 2^{-x} against the truncated K process:
//! total variation between the laws of the state at t = 1.
//!
//!     cargo run --release --example convergence

use trapk::experiment::{hypercube_marginal, k_marginal};
use trapk::kprocess::choose_truncation;
use trapk::stats::compare_distributions;
use trapk::{GammaMeasure, RngSpec, State, TrapModelSpec};

fn main() -> trapk::Result<()> {
    let gamma = GammaMeasure::geometric(0.5, 64)?;
    let m = choose_truncation(&gamma, 1e-4)?;
    let replicas = 20_000;
    let k = k_marginal(&gamma, m, State::Site(1), 1.0, replicas, 2, 20)?;
    println!("K process truncated at M = {m}");
    for d in [6u32, 8, 10, 12] {
        let means: Vec<f64> = (1..=1usize << d)
            .map(|x| 0.5f64.powf(x as f64).max(f64::MIN_POSITIVE))
            .collect();
        let spec = TrapModelSpec::hypercube_ranked(means, &mut RngSpec::new(1, d as u64).rng())?;
        let h = hypercube_marginal(&spec, 1, 1.0, replicas, 1, 20)?;
        let c = compare_distributions(&h, &k)?;
        println!("d = {d:>2}: TV = {:.4}  chi2 p = {:.3}", c.tv_distance, c.pvalue);
    }
    Ok(())
}
