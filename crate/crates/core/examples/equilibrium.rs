//! The complete-graph trap model forgets its start: at t >> Σγ the state is
//! distributed as γ/Σγ, and long-run occupation fractions agree.
//!
//!     cargo run --release --example equilibrium

use trapk::experiment::{run, ExperimentConfig, ExperimentKind};
use trapk::stats::{equilibrium_overlap, occupation_fractions};
use trapk::{RngSpec, TrapModelSpec};

fn main() -> trapk::Result<()> {
    let gamma = [5.0, 4.0, 3.0, 2.0, 1.0];
    let spec = TrapModelSpec::complete(&gamma)?;
    let path = spec.simulate(1, 1e5, &mut RngSpec::new(1, 0).rng())?;
    let occ = occupation_fractions(&path, 5);
    for (x, (o, g)) in occ.iter().zip(gamma).enumerate() {
        println!("rank {}: time fraction {o:.4}  gamma_bar {:.4}", x + 1, g / 15.0);
    }
    println!("sum of gamma_bar^2 = {:.4}", equilibrium_overlap(&gamma));

    let mut cfg = ExperimentConfig::new(ExperimentKind::Equilibrium);
    cfg.replicas = Some(20_000);
    let out = run(cfg)?;
    println!("\n{}", out.csv);
    println!("chi-square: {}", out.report.results["chi_square"]);
    Ok(())
}
