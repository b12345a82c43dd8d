mod common;
pub mod ergm;
pub mod potts;
pub mod ratio_study;
pub mod validate;
