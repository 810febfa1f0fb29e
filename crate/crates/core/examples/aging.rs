//! Two-time correlations against the arcsine law, for the K process at a
//! small time scale and for the REM-like trap model on a shortened clock.
//!
//!     cargo run --release --example aging

use trapk::disorder::{AnnealedHypercube, DisorderKind, DisorderSpec};
use trapk::kprocess::{sample_k_process, sample_stable_gamma_seeded};
use trapk::rng::Domain;
use trapk::stats::{aging_curve, AgingCurve};
use trapk::{Result, RngSpec, State, Trajectory};

fn show(name: &str, curve: &AgingCurve) -> Result<()> {
    println!("{name}");
    for ((th, e), r) in curve.theta_values.iter().zip(&curve.estimates).zip(curve.theory()?) {
        println!("  theta {th:<4} estimate {:.4} +- {:.4}   R = {r:.4}", e.point, e.half_width);
    }
    Ok(())
}

fn main() -> Result<()> {
    let alpha = 0.5;
    let thetas = [0.5, 1.0, 2.0];

    let m = 1000;
    let gamma = sample_stable_gamma_seeded(alpha, m, RngSpec::new(0, 0))?;
    let k = |rng: RngSpec, horizon: f64| -> Result<Trajectory> {
        let y0 = rand::Rng::random_range(&mut rng.rng_for(Domain::Start), 1..=m);
        Ok(sample_k_process(&gamma, m, State::Site(y0), horizon, &mut rng.rng())?.trajectory)
    };
    show("K process, M = 1000, eps = 1e-3", &aging_curve(&k, alpha, 1.0, &thetas, 1e-3, 20_000, 1)?)?;

    let disorder = DisorderSpec {
        kind: DisorderKind::RemLikePareto { alpha },
        d: 14,
    };
    let model = AnnealedHypercube::new(disorder, disorder.c_d())?;
    let rem = |rng: RngSpec, horizon: f64| model.simulate(horizon, rng);
    // c'_d = c_d 2^{d/(2α)}, read on the c_d clock.
    let scale = (-14.0 / (2.0 * alpha)).exp2();
    show("REM-like, d = 14, short scale", &aging_curve(&rem, alpha, 1.0, &thetas, scale, 20_000, 2)?)?;

    println!("\nas CSV:");
    aging_curve(&k, alpha, 1.0, &thetas, 1e-3, 2_000, 3)?.write_csv(std::io::stdout())?;
    Ok(())
}
