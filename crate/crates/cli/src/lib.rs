//! Experiment driver for the `nhmc` crate: configuration parsing plus
//! the `validate`, `ratio-study`, `potts` and `ergm` commands. The
//! binary front-end lives in `main.rs`; everything here is callable
//! directly, which is how the integration tests drive it.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::ergm::{cmd_ergm, ErgmConfig};
pub use commands::potts::{cmd_potts, PottsConfig};
pub use commands::ratio_study::{cmd_ratio_study, RatioStudyConfig};
pub use commands::validate::{cmd_validate, CheckResult, ValidateConfig};
pub use config::{ConfigMap, Overrides};
