//! MCMC kernels: the leapfrog integrator and plain HMC for tractable
//! validation targets, noisy HMC for doubly-intractable posteriors, and
//! the exchange / noisy-exchange random-walk baselines, plus the chain
//! runner that drives any of them and records traces.

mod chain;
mod exchange;
mod hmc;
mod leapfrog;
mod mass;
mod noisy_hmc;

pub use chain::{
    run_chain, run_chains, ChainTrace, KernelInfo, KernelStep, TractableHmcKernel,
    TransitionKernel,
};
pub use exchange::{ExchangeKernel, ExchangeStep, MvnProposal};
pub use hmc::{hmc_iteration, hmc_proposal, GaussianTarget, HmcStep, TractableTarget};
pub use leapfrog::{leapfrog, PhasePoint};
pub use mass::MassMatrix;
pub use noisy_hmc::{
    ExactSource, GradRatioSource, MonteCarloSource, NoisyHmcKernel, NoisyHmcStep, SourceStep,
};
