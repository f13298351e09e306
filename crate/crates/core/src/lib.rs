//! Numerical lab for intermittent interval maps generated by cut functions.
//!
//! The pipeline: a [`CutFunction`] defines a [`FactorMap`]; its dynamical
//! partition ([`PartitionTable`]) fixes the parameters of the hyperbolic-time
//! predicate ([`HypParams`]); the Monte Carlo engine measures tails and
//! averages over deterministic parallel samples.

pub mod cutfunc;
pub mod error;
pub mod factor_map;
pub mod fit;
pub mod hyptimes;
pub mod mc_engine;
pub mod partition;
pub mod quadrature;
pub mod tower_stats;
mod roots;

pub use cutfunc::{CustomCut, CutFunction, CutKind, ValidationReport};
pub use error::{Error, Result};
pub use factor_map::{FactorMap, OrbitRecord, Point, Step};
pub use partition::{build_partition, period2_orbit, AsymptoticsReport, IntervalId, PartitionTable, Side};
pub use hyptimes::{derive_params, HypParams, Hit, Overrides};
pub use mc_engine::{tail_fit, Obs, SampleConfig, TailEstimate};
pub use tower_stats::{ReturnRecord, LdRecord};
