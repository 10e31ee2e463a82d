//! Experiment runners and their persistent records.

mod bench;
mod chaos;
mod probes;
mod quality;
mod record;
mod stability;

pub use bench::{bench, fit_loglog_slope, BenchPoint, BenchResult};
pub use chaos::{run_chaos, ChaosOptions, ChaosResult, MAX_CHAOS_N};
pub use probes::{
    covariance_probe, free_energy_derivative_probe, martingale_probe, mean_abs_overlap, overlap_lipschitz_probe,
    rounding_contraction_probe, w2_consistency, CovarianceCheck, CovarianceOptions, FreeEnergyDerivativeCheck,
    FreeEnergyDerivativeOptions, MartingaleCheck, MartingaleOptions, OverlapLipschitzCheck, OverlapLipschitzOptions,
    RoundingCheck, RoundingOptions,
};
pub use quality::{compare_to_exact, run_sampling_quality, Estimate, HorizonComparison, DEFAULT_W2_BATCH, MAX_QUALITY_N};
pub use record::{
    bootstrap_se, bootstrap_se_with, mean, read_record, write_record, Curve, RunRecord, Timestamps,
    BOOTSTRAP_RESAMPLES, RECORD_SCHEMA_VERSION,
};
pub use stability::{paired_sq_distances, run_stability};
