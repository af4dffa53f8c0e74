//! Pointwise bootstrap procedures for spatial point process statistics,
//! together with the closed forms and oracles that audit them.
//!
//! * [`two_point`]: two-point estimators and distinct-index sums.
//! * [`bootstrap`]: resampling weights, `θ̂*`, `v̂*_N` and its `N → ∞` limit.
//! * [`moments`]: the `s₂, s₃, s₄` integrals for a Poisson ground truth.
//! * [`intensity`]: kernel intensity estimation and confidence bands.
//! * [`experiment`]: end-to-end comparison runs.

pub mod bootstrap;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod intensity;
pub mod kernel;
pub mod moments;
pub mod numeric;
pub mod rng;
pub mod two_point;

pub use error::{Error, Result};
pub use geometry::{Domain, Interval1, IntensityFunction, LinePattern, PlanarPattern, PointPattern, Window2};
pub use kernel::{KernelFunction, KernelKind};
pub use rng::RngSeed;
pub use two_point::{PairFunction, PairSpec, PairTable, TwoPointSums};
