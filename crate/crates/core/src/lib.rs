//! Branching Lévy processes: admissibility and convergence criteria for the
//! additive martingale, plus event-driven simulation of the particle system,
//! its spine decomposition and the Monte Carlo harness that confronts the two.
//!
//! The crate is `no_std` (it only needs `alloc`). Everything that touches
//! files, threads or the command line lives in the companion `branchlevy`
//! crate.
//!
//! Module map:
//!
//! * [`measure`]: point configurations, branching Lévy measures, truncation
//!   and size-biased (tilted) samplers.
//! * [`cumulant`]: the cumulant `κ`, its derivative, Lévy exponents and the
//!   criterion checkers.
//! * [`engine`]: the untilted particle system and the additive martingale.
//! * [`spine`]: the spine, the tilted particle system and `W*`.
//! * [`mc`]: replicated experiments, estimators and the KS test.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > y)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cumulant;
pub mod engine;
pub mod error;
pub mod math;
pub mod mc;
pub mod measure;
pub mod quad;
pub mod rng;
pub mod series;
pub mod spine;

pub use cumulant::{CriterionReport, Triplet, Verdict};
pub use engine::{Caps, SimModel, SimOptions, Trajectory};
pub use error::Error;
pub use measure::{BranchingLevyMeasure, PointConfiguration};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
