//! The deepest traps of REM-like and REM environments on the ergodic scale
//! c_d, next to the stable weights they approach.
//!
//!     cargo run --release --example rem_extremes

use trapk::disorder::{beta_critical, ergodic_scale_check, sample_rem, sample_rem_like};
use trapk::kprocess::sample_stable_gamma_seeded;
use trapk::rng::run_replicas;
use trapk::stats::ks_one_sample;
use trapk::RngSpec;

fn main() -> trapk::Result<()> {
    let alpha = 0.5;
    let env = sample_rem_like(alpha, 16, RngSpec::new(5, 0))?;
    println!("REM-like d = 16: c_d = {:e} = 2^-32", env.c_d);
    println!("{}", serde_json::to_string_pretty(&env.summary(5))?);

    let gamma = sample_stable_gamma_seeded(alpha, 10, RngSpec::new(5, 0))?;
    let logs: Vec<String> = ergodic_scale_check(&env, &gamma, 5).iter().map(|x| format!("{x:+.2}")).collect();
    println!("log(scaled mean / stable weight), top 5: {}", logs.join(" "));

    // (τ̂_1)^{-α} should be Exp(1) in the limit.
    let firsts = run_replicas(9, 2_000, |rng| {
        Ok(sample_rem_like(alpha, 12, rng)?.scaled_means[0].powf(-alpha))
    })?;
    let ks = ks_one_sample(&firsts, |x| 1.0 - (-x.max(0.0)).exp());
    println!("d = 12, 2000 environments: KS D = {:.4}, p = {:.3}", ks.statistic, ks.pvalue);

    let beta = 2.0 * beta_critical();
    let rem = sample_rem(beta, 16, RngSpec::new(5, 1))?;
    println!("\nREM beta = {beta:.4} (alpha = {:.2}): c_d = {:e}", rem.spec.alpha(), rem.c_d);
    println!("top scaled means: {:?}", rem.summary(5).top_scaled_means);
    println!("below the critical temperature: {}", sample_rem(1.0, 8, RngSpec::new(0, 0)).unwrap_err());
    Ok(())
}
