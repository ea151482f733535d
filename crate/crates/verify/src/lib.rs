//! Executable versions of the a priori estimates that accompany the Landau
//! solver: barrier residuals, the Grönwall-type threshold, matching of
//! initial data, the weak formulation, weighted-norm and Hölder propagation,
//! the uniqueness contraction functional and Hölder interpolation bounds.
//!
//! Every check is deterministic given its seed and returns a
//! [`CheckReport`] with a pass flag, a margin and a witness.

pub mod barrier;
pub mod criteria;
pub mod gronwall;
pub mod holder;
pub mod interpolation;
pub mod matching;
pub mod propagation;
pub mod report;
pub mod uniqueness;
pub mod weak_form;

pub use report::{timed, CheckReport};
