//! Random discrete measures on ℝ^d and their equilibrium dynamics.
//!
//! The crate simulates completely random measures (atom clouds with an
//! intensity `σ(ds,dx) = l(s,x)/s ds dx`) and their finite-volume Gibbs
//! perturbations, provides the differential calculus on the cone of
//! discrete measures (gradients, square field, generator), integrates the
//! induced diffusion of atoms, and verifies the defining integral
//! identities (Campbell/Mecke, Nguyen–Zessin, integration by parts,
//! stationarity, reversibility) by Monte Carlo against independent oracles.
//!
//! All numeric code is generic over the scalar type; `f64`-concrete
//! aliases are exported at the crate root.

pub mod calculus;
pub mod cell_list;
pub mod crm;
pub mod cylinder;
pub mod cutoffs;
pub mod density;
pub mod gibbs;
pub mod identities;
pub mod error;
pub mod measure;
pub mod metric;
pub mod observable;
pub mod potential;
pub mod quad;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod tangent;
pub mod smooth;
pub mod window;

pub use error::{KoneError, Result};
pub use scalar::{real, Scalar};

/// Concrete scalar used by the CLI and the default aliases.
pub type Real = f64;
/// Discrete measure over `Real`.
pub type Measure = measure::DiscreteMeasure<Real>;
/// Marked configuration over `Real`.
pub type Configuration = measure::MarkedConfiguration<Real>;
/// Observation window over `Real`.
pub type Box2 = window::Window<Real>;
