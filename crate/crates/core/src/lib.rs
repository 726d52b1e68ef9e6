//! Nonuniform balls-into-boxes coalescence.
//!
//! At every round each of the `B(t)` balls is dropped independently into box
//! `j` with probability `p_j`; balls sharing a box fuse. The crate provides the
//! exact transition kernel of the ball count, a seeded Monte Carlo engine, the
//! deterministic one-step maps, and numerical checks of the extremal and
//! large-deviation inequalities that govern the coalescence time.

pub mod asymptotics;
pub mod distributions;
pub mod dynamics;
pub mod error;
pub mod exact_chain;
pub mod par;
pub mod report;
pub mod simulate;
pub mod tail_bounds;
pub mod variational;

pub use distributions::{DistributionSpec, Moments, ProbabilityVector};
pub use error::{Error, Result};
pub use exact_chain::{TransitionRow, TriangularKernel};
pub use par::Execution;
pub use simulate::{RunResult, SimConfig, SummaryStats};
pub use tail_bounds::StationaryPoint;
