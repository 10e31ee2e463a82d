//! Algorithmic stochastic localization for the Sherrington–Kirkpatrick Gibbs
//! measure.
//!
//! The sampler drives the Euler-discretized localization process
//! `ŷ_{ℓ+1} = ŷ_ℓ + m̂(A, ŷ_ℓ) δ + sqrt(δ) w_{ℓ+1}` where the tilted mean
//! `m̂(A, y)` comes from AMP followed by natural gradient descent on the TAP
//! free energy, then rounds the final mean to a spin configuration.
//! Small systems are checked against exact enumeration in [`oracle`].

pub mod amp;
pub mod disorder;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod magnetization;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod state_evolution;
pub mod tap;
pub mod verify;

pub use disorder::{interpolate, operator_norm, sample_goe, sample_planted, CouplingMatrix, DisorderPath, PlantedInstance};
pub use error::{Error, Result};
pub use magnetization::MagnetizationVector;
pub use sampler::{EmpiricalSample, RunConfig, RunPlan};
pub use state_evolution::{Quadrature, ScheduleTable};
