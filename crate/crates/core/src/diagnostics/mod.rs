//! Chain-quality diagnostics: effective sample size, accepted-move
//! lengths, and per-chain summaries with optional exact references.

mod ess;
mod moves;
mod summary;

pub use ess::{effective_sample_size, EssEstimate};
pub use moves::accepted_move_lengths;
pub use summary::{
    aggregate, posterior_mean_mse, read_summary_csv, summarize, write_summary_csv, ChainSummary,
    ChainTiming, GroundTruth, DEFAULT_BURN_IN,
};
