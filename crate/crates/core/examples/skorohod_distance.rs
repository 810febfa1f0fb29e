//! Bounding the Skorohod distance between a hypercube trap path and its
//! restriction to the M deepest traps, using time changes that match the
//! visits to {1..K}.
//!
//!     cargo run --release --example skorohod_distance

use trapk::experiment::candidate_distortions;
use trapk::skorohod::{
    build_time_distortion, distortion_bound, entrance_exit_times, phi, rho_given_lambda, rho_upper_bound,
    time_changed, TimeDistortion,
};
use trapk::{RngSpec, State, Trajectory, TrapModelSpec};

fn main() -> trapk::Result<()> {
    let f = Trajectory::from_pairs(
        State::Site(3),
        &[(1.0, State::Site(1)), (2.0, State::Site(5)), (4.0, State::Site(2))],
        5.0,
    )?;
    let times = entrance_exit_times(&f, 2, 5.0)?;
    println!("visits to {{1, 2}}: {:?}, next entry {}", times.visits, times.next_entry);

    // Stretch the path and recover the stretch.
    let stretch = TimeDistortion::new(vec![(0.0, 0.0), (1.0, 1.5), (2.0, 2.0)], 1.2)?;
    let g = time_changed(&f, &stretch);
    let lambda = build_time_distortion(&times, &entrance_exit_times(&g, 2, g.horizon())?)?;
    println!("matched knots {:?}", lambda.knots());
    println!(
        "phi = {:.4} (bound {:.4}), integral = {:.2e}",
        phi(&lambda),
        distortion_bound(&times, &entrance_exit_times(&g, 2, g.horizon())?)?,
        rho_given_lambda(&f, &g, &lambda)?
    );

    let means: Vec<f64> = (1..=1024).map(|x| 0.5f64.powi(x).max(f64::MIN_POSITIVE)).collect();
    let spec = TrapModelSpec::hypercube_ranked(means, &mut RngSpec::new(1, 0).rng())?;
    println!("\nd = 10, restriction to M = 14:");
    for i in 0..5 {
        let f = spec.simulate(1, 1.0, &mut RngSpec::new(2, i).rng())?;
        let g = f.restrict(14);
        let cands = candidate_distortions(&f, &g, &[1, 2, 4, 8])?;
        let lambdas: Vec<TimeDistortion> = cands.iter().map(|c| c.1.clone()).collect();
        let b = rho_upper_bound(&f, &g, &lambdas)?;
        println!(
            "  path {i}: {:>5} jumps, identity {:.4}, best {:.4} via {}",
            f.jumps().len(),
            rho_given_lambda(&f, &g, &TimeDistortion::identity())?,
            b.value,
            cands[b.best].0
        );
    }
    Ok(())
}
