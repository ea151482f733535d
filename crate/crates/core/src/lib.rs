//! Deterministic solver and diagnostics for the spatially inhomogeneous
//! Landau equation with soft potentials `γ ∈ [−3, 0)`.
//!
//! Everything numeric is generic over [`Real`] (`f32`, `f64`); the exponent
//! formulas are also generic over exact rationals. The aliases below fix the
//! scalar to `f64`.

pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod numerics;
pub mod scalar;
pub mod snapshot;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::{Rational, Real};

pub type VelocityGrid = grid::VelocityGrid<f64>;
pub type SpatialGrid = grid::SpatialGrid<f64>;
pub type PhaseGrid = grid::PhaseGrid<f64>;
pub type PhasePoint = grid::PhasePoint<f64>;
pub type DistributionField = field::DistributionField<f64>;
pub type CoefficientField = coefficients::CoefficientField<f64>;
pub type CollisionKernel = coefficients::CollisionKernel<f64>;
pub type CoefficientEngine = coefficients::CoefficientEngine<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type Solver = solver::Solver<f64>;
pub type TrajectoryRecord = solver::TrajectoryRecord<f64>;
pub type KineticTransform = diagnostics::KineticTransform<f64>;
pub type HolderEstimate = diagnostics::HolderEstimate<f64>;
