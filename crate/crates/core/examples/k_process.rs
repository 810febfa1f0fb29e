//! Sampling the K process: truncation level from a tail tolerance, one
//! path written as CSV, and the first clock rings.
//!
//!     cargo run --release --example k_process

use trapk::kprocess::{choose_truncation, clock_events, sample_k_process_truncated, sample_stable_gamma_seeded};
use trapk::{GammaMeasure, RngSpec, State};

fn main() -> trapk::Result<()> {
    let gamma = GammaMeasure::geometric(0.5, 60)?;
    for eps in [1e-2, 1e-4, 1e-8] {
        let m = choose_truncation(&gamma, eps)?;
        println!("geometric weights, tail <= {eps:e}: M = {m}, tail = {:e}", gamma.mass_beyond(m));
    }

    // Starting at ∞ costs no time; the first site is uniform on {1..M}.
    let sample = sample_k_process_truncated(&gamma, 8, State::Infinity, 2.0, RngSpec::new(3, 0))?;
    println!("\npath from inf at M = 8 on [0, 2]:");
    sample.trajectory.write_csv(std::io::stdout())?;

    let (t0, events) = clock_events(&gamma, 8, State::Site(1), 5, &mut RngSpec::new(3, 1).rng())?;
    println!("\ninitial sojourn {t0:.4}, then:");
    for e in events {
        println!("  site {:>2} rings at secondary time {:.4}, stays {:.5}", e.site, e.secondary_time, e.duration);
    }

    let stable = sample_stable_gamma_seeded(0.5, 1000, RngSpec::new(1, 0))?;
    let top: Vec<String> = stable.weights()[..5].iter().map(|w| format!("{w:.4}")).collect();
    println!(
        "\nstable(0.5) weights: top {} ..., total {:.4} (tail estimate {:.2e})",
        top.join(" "),
        stable.total_mass(),
        stable.tail_mass()
    );
    println!("as JSON: {}...", &stable.to_json()[..40]);
    Ok(())
}
