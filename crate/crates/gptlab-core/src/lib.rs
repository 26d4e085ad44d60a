//! Toolkit for finite-dimensional generalized probabilistic theories:
//! convex state spaces with effects and measurements, affine invertible
//! dynamics, minimal/maximal tensor composites, the measurement-infimum
//! fidelity computed by linear programming, and a simulator/auditor for
//! weak-repeatability information-transfer chains.

pub mod error;
pub mod exec;
pub mod lp;
pub mod fidelity;
pub mod models;
pub mod tensor;
pub mod transform;
pub mod rays;
pub mod rng;
pub mod space;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use space::{
    evaluate_effect, measure, membership, Distribution, Effect, Measurement, Membership, State,
    StateSpace, DEFAULT_TOL,
};
