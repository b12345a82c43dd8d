//! Tuning pipeline for the noisy samplers: dual averaging of the step
//! size towards a target acceptance, the fixed-integration-time step
//! schedule, stochastic-approximation mode search, and mass-matrix
//! construction from the precision estimate at the mode.

mod adapt;
mod dual_averaging;
mod map_search;
mod mass;
mod schedule;

pub use adapt::{adapt_step_size, find_initial_step_size, StepSizeFit};
pub use dual_averaging::{DualAveraging, DualAveragingOptions};
pub use map_search::{
    map_search_robbins_monro, map_search_robbins_monro_with, map_search_ruppert_polyak,
    map_search_ruppert_polyak_with, MapEstimate, RuppertPolyakOptions, ROBBINS_MONRO_GAIN,
    ROBBINS_MONRO_ITERS,
};
pub use mass::{exchange_proposal_cov, mass_matrix_from_mode, HESSIAN_DRAWS};
pub use schedule::{integration_time, leapfrog_steps};
