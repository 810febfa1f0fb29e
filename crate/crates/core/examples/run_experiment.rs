//! Driving an experiment from a JSON config, as `trapk run --config` does.
//!
//!     cargo run --release --example run_experiment

use trapk::experiment::{run, ExperimentConfig};

fn main() -> trapk::Result<()> {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "schema_version": 1,
            "experiment": "entrance-law",
            "d": 10,
            "J": 4,
            "replicas": 20000,
            "seed": 7
        }"#,
    )?;
    let out = run(cfg)?;
    print!("{}", out.csv);
    println!("{}", serde_json::to_string_pretty(&out.report)?);
    Ok(())
}
