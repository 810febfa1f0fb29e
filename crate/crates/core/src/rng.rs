//! Seeded random streams and the parallel replica runner.
//!
//! Every replica draws from its own ChaCha8 stream keyed by
//! `(master_seed, domain)` with the replica index as the stream number, so
//! results never depend on how replicas are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Independent purposes that must never share random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Dynamics,
    Disorder,
    Placement,
    Start,
}

impl Domain {
    fn salt(self) -> u64 {
        match self {
            Domain::Dynamics => 0x6479_6e61_6d69_6373,
            Domain::Disorder => 0x6469_736f_7264_6572,
            Domain::Placement => 0x706c_6163_656d_656e,
            Domain::Start => 0x7374_6172_7400_0000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub replica_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngSpec {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        RngSpec {
            master_seed,
            replica_index,
        }
    }

    /// Dynamics stream of this replica.
    pub fn rng(&self) -> ChaCha8Rng {
        self.rng_for(Domain::Dynamics)
    }

    pub fn rng_for(&self, domain: Domain) -> ChaCha8Rng {
        let key = splitmix64(self.master_seed ^ domain.salt());
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(self.replica_index);
        rng
    }

    /// A fresh master seed derived from this one, for nesting experiments
    /// (e.g. one sub-run per dimension) without stream collisions.
    pub fn derive(&self, tag: u64) -> RngSpec {
        RngSpec::new(
            splitmix64(self.master_seed ^ splitmix64(tag.wrapping_add(self.replica_index))),
            0,
        )
    }
}

/// Runs `replicas` independent replicas, replica `i` receiving
/// `RngSpec::new(master_seed, i)`. Output is in replica order.
///
/// A failing replica aborts the run; the error carries its index.
pub fn run_replicas<T, F>(master_seed: u64, replicas: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RngSpec) -> Result<T> + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            f(RngSpec::new(master_seed, i)).map_err(|e| match e {
                e @ Error::Replica { .. } => e,
                other => Error::Replica {
                    index: i,
                    message: other.to_string(),
                },
            })
        })
        .collect()
}

/// Like [`run_replicas`] but folds results with an associative, commutative
/// `merge` instead of materializing them.
pub fn fold_replicas<A, F, M>(
    master_seed: u64,
    replicas: u64,
    init: impl Fn() -> A + Sync + Send,
    f: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    F: Fn(&mut A, RngSpec) -> Result<()> + Sync,
    M: Fn(A, A) -> A + Sync + Send,
{
    (0..replicas)
        .into_par_iter()
        .try_fold(&init, |mut acc, i| {
            f(&mut acc, RngSpec::new(master_seed, i)).map_err(|e| Error::Replica {
                index: i,
                message: e.to_string(),
            })?;
            Ok(acc)
        })
        .try_reduce(&init, |a, b| Ok(merge(a, b)))
}
