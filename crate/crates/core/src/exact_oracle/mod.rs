//! Exact and brute-force reference computations.
//!
//! Everything here exists to make the estimators and samplers checkable:
//! an exact Potts log-partition by boundary recursion, full enumeration
//! for tiny instances of either model, exact posterior summaries by
//! quadrature on a grid, and the binned Kullback-Leibler divergence of
//! an empirical sample against that grid.

mod kl;
mod partition;
mod posterior;

pub use kl::{kl_divergence_binned, DEFAULT_KL_BIN};
pub use partition::{
    brute_force_log_z, enumerate_stats, exhaustive_cov_stats, exhaustive_mean_stats, grad_log_z,
    log_ratio, log_z_from_stats, potts_grad_log_z, potts_log_z, potts_log_z_capped, GRAD_STEP,
    MAX_BOUNDARY_BITS, MAX_ENUMERATION,
};
pub use posterior::{GridSampler, PosteriorGrid};
