//! Where the embedded chain first lands in the J deepest traps of the
//! hypercube. The frequencies flatten towards 1/J as d grows.
//!
//!     cargo run --release --example entrance_law

use trapk::disorder::sample_rem_like;
use trapk::stats::chi_square_gof;
use trapk::trapmodel::{entrance_hitting_distribution, StartLaw};
use trapk::RngSpec;

fn main() -> trapk::Result<()> {
    let j = 5;
    let targets: Vec<usize> = (1..=j).collect();
    println!("{:>3} {:>44} {:>9} {:>8}", "d", "hitting frequencies", "max dev", "p-value");
    for d in [6, 8, 10, 12] {
        let env = sample_rem_like(0.5, d, RngSpec::new(11, d as u64))?;
        let spec = env.trap_model();
        let hits = entrance_hitting_distribution(
            &spec,
            &targets,
            StartLaw::UniformOutsideTarget,
            50_000,
            RngSpec::new(7, 0),
        )?;
        let test = chi_square_gof(&hits.counts, &vec![1.0 / j as f64; j])?;
        let freqs: Vec<String> = hits.frequencies().iter().map(|f| format!("{f:.4}")).collect();
        println!(
            "{d:>3} {:>44} {:>9.4} {:>8.3}",
            freqs.join(" "),
            hits.max_deviation_from_uniform(),
            test.pvalue
        );
    }
    Ok(())
}
