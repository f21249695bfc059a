//! Bayesian multivariate isotonic regression via the projection-posterior.
//!
//! The model places independent normal priors on the heights of a
//! block-constant regression function over a `J^d` partition of `[0,1]^d`,
//! yielding a conjugate unrestricted posterior. Posterior draws are projected
//! onto the monotone cone (weighted L1 or L2) to obtain the
//! projection-posterior, which drives estimation and two Bayesian
//! monotonicity tests. A simulation harness reproduces the reference
//! estimation and testing experiments at desk scale.

pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod posterior;
pub mod projection;
pub mod rng;
pub mod simbench;
pub mod testing;

pub use error::{Error, Result};
pub use grid::{bin, block_index, is_monotone, BlockStats, Dataset, GridSpec, MultiIndex, StepFunction};
pub use projection::{brute_force_project, distance_to_cone, project_l1, project_l2, WeightVector};
