//! Scenario files, output formats and the `branchlevy` command line for
//! [`branchlevy_core`].
// `!(x > y)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod expr;
pub mod output;
pub mod registry;
pub mod run;
pub mod scenario;
pub mod verify;

use std::path::PathBuf;

use branchlevy_core::mc::Replicator;
use rayon::prelude::*;

pub use run::{run, Command, RunOptions, RunOutcome};
pub use scenario::{parse_scenario, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] branchlevy_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Every error is a problem with the scenario or the environment; verify
    /// mismatches are reported through [`RunOutcome`] instead.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Replicas spread over a rayon pool; results stay in replica order.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `None` uses every available core.
    pub fn new(jobs: Option<usize>) -> Self {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            b = b.num_threads(j.max(1));
        }
        Self { pool: b.build().expect("thread pool") }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Replicator for Parallel {
    fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
