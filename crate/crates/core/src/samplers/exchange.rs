//! Exchange algorithm and its multi-draw variant.
//!
//! A Gaussian random-walk proposal θ′ ~ N(θ, C) is accepted with the
//! intractable ratio Z(θ)/Z(θ′) replaced by an importance-sampling
//! estimate from draws at θ′. One draw gives the exchange algorithm,
//! whose single-sample weight makes the acceptance exact in
//! expectation; `n_draws > 1` gives the noisy exchange, which trades
//! exactness for a lower-variance ratio estimate.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::{segment_log_ratio, AuxiliaryBatch};
use crate::gibbs_models::GibbsModel;
use crate::params::{ParamVector, SuffStats};
use crate::prior::Prior;

/// Symmetric Gaussian random-walk proposal.
#[derive(Clone, Debug)]
pub struct MvnProposal {
    factor: DMatrix<f64>,
}

impl MvnProposal {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(covariance).ok_or(Error::NotPositiveDefinite)?;
        Ok(MvnProposal { factor: chol.l() })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, center: &ParamVector, rng: &mut R) -> ParamVector {
        let z = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        let shift = &self.factor * z;
        center.plus_scaled(1.0, shift.as_slice())
    }
}

/// Outcome of one exchange iteration.
#[derive(Clone, Debug)]
pub struct ExchangeStep {
    pub next: ParamVector,
    pub accepted: bool,
    /// min(0, log ρ̂).
    pub log_accept: f64,
    pub proposal: ParamVector,
}

/// The exchange transition kernel (noisy for `n_draws > 1`).
#[derive(Clone, Debug)]
pub struct ExchangeKernel<'a, M: GibbsModel> {
    model: &'a M,
    obs_stats: SuffStats,
    prior: &'a Prior,
    proposal: MvnProposal,
    n_draws: usize,
    sweeps: usize,
}

impl<'a, M: GibbsModel> ExchangeKernel<'a, M> {
    pub fn new(
        model: &'a M,
        x_obs: &M::Config,
        prior: &'a Prior,
        proposal: MvnProposal,
        n_draws: usize,
        sweeps: usize,
    ) -> Result<Self> {
        if proposal.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: proposal.dim(),
            });
        }
        assert!(n_draws >= 1 && sweeps >= 1);
        Ok(ExchangeKernel {
            model,
            obs_stats: model.suff_stats(x_obs)?,
            prior,
            proposal,
            n_draws,
            sweeps,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn model_dim(&self) -> usize {
        self.model.dim()
    }

    /// One iteration: propose, draw the auxiliary batch at the proposal,
    /// accept with the estimated cancellation ratio
    /// log ρ̂ = log Ẑ(θ)/Z(θ′) + (θ′ − θ)ᵀ s(x_obs) + log p(θ′) − log p(θ).
    pub fn step<R: Rng + ?Sized>(&self, theta: &ParamVector, rng: &mut R) -> Result<ExchangeStep> {
        theta.check_dim(self.model.dim())?;
        let proposal = self.proposal.sample(theta, rng);
        if !self.prior.contains(&proposal) {
            return Ok(ExchangeStep {
                next: theta.clone(),
                accepted: false,
                log_accept: f64::NEG_INFINITY,
                proposal,
            });
        }
        let batch = AuxiliaryBatch::simulate(self.model, &proposal, self.n_draws, self.sweeps, rng);
        let log_rho = segment_log_ratio(theta, &proposal, &batch)
            + proposal
                .iter()
                .zip(theta.iter())
                .zip(self.obs_stats.iter())
                .map(|((p, t), s)| (p - t) * s)
                .sum::<f64>()
            + self.prior.log_density(&proposal)
            - self.prior.log_density(theta);
        let log_accept = log_rho.min(0.0);
        let accepted = rng.random::<f64>().ln() < log_accept;
        Ok(ExchangeStep {
            next: if accepted {
                proposal.clone()
            } else {
                theta.clone()
            },
            accepted,
            log_accept,
            proposal,
        })
    }
}
