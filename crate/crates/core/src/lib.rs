//! Trap models on the hypercube and the complete graph, the K process, and
//! Monte Carlo tools for checking how one converges to the other.
//!
//! States are ranks: `1` is the deepest trap. Paths are right-continuous
//! step functions on `{1, 2, ...} ∪ {∞}` ([`Trajectory`]).
//!
//! ```
//! use trapk::{kprocess::GammaMeasure, kprocess::choose_truncation};
//!
//! let gamma = GammaMeasure::geometric(0.5, 40).unwrap();
//! assert_eq!(choose_truncation(&gamma, 2f64.powi(-10)).unwrap(), 10);
//! ```

pub mod disorder;
pub mod error;
pub mod experiment;
pub mod kprocess;
pub mod quadrature;
pub mod rng;
pub mod skorohod;
pub mod stats;
pub mod trajectory;
pub mod trapmodel;

pub use error::{Error, Result};
pub use kprocess::GammaMeasure;
pub use rng::RngSpec;
pub use trajectory::{State, Trajectory};
pub use trapmodel::{Graph, TrapModelSpec};
