//! Replicated experiments confronting the criteria with simulation.
//!
//! Every experiment draws replica `r` from streams derived from `(seed, r)`
//! alone and reduces results in replica order, so the numbers do not depend
//! on how a [`Replicator`] schedules the work.

mod experiments;
mod stats;

pub use experiments::*;
pub use stats::{kolmogorov_survival, ks_test, quantile, quantile_sorted, z_score, Estimate, KsResult, Quantile};

use alloc::vec::Vec;

/// Runs `f(0), ..., f(n-1)` and returns the results in replica order.
pub trait Replicator {
    fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// One replica after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Replicator for Sequential {
    fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
