//! Joint UE pairing and power allocation for a single-cell full-duplex
//! base station serving half-duplex UL and DL users.
//!
//! The crate is layered bottom-up:
//!
//! * [`model`]: domain types and unit conversions,
//! * [`scenario`]: random network drops and path gains,
//! * [`radio`]: SINR, spectral efficiency and the per-pair corner search,
//! * [`assignment`]: Hungarian solver plus a brute-force oracle,
//! * [`solvers`]: the four scheduling strategies and the dual multipliers,
//! * [`metrics`]: Jain's index, empirical CDFs, percentile gaps,
//! * [`harness`]: seeded Monte Carlo experiments and their output files.

pub mod assignment;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod radio;
pub mod scenario;
pub mod solvers;

pub use model::{
    GainTable, Pairing, PowerAllocation, ScenarioParams, ScheduleOutcome, WeightMode, WeightVector,
};
pub use solvers::StrategyId;
