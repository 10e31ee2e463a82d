//! Ground truth for small systems: exact enumeration of the tilted Gibbs
//! measure, a Glauber baseline, partition functions, and assignment-based
//! Wasserstein distances between sample batches.

mod exact;
mod glauber;
mod partition;
mod transport;

pub use exact::{
    covariance, exact_build, exact_cov_top_eigenvalue, exact_mean, exact_sample, second_moment, spin_of, ExactGibbs,
    MAX_EXACT_N,
};
pub use glauber::{glauber_run, glauber_run_tilted, heat_bath_probability, heat_bath_sweep};
pub use partition::{log_z_sk, log_z_sk_estimate, AisOptions, LogZEstimate};
pub use transport::{assignment, permutation_threshold, w2_empirical, w2_points, TransportPlan, MAX_ASSIGNMENT_SIZE};
